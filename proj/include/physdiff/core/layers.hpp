#pragma once

// Parameterized layers built from the primitives in ops.hpp. Forward passes are
// const and write everything backward needs into a caller-owned cache, so a
// model can be shared read-only across threads. Backward passes accumulate
// into the Param gradients.

#include "ops.hpp"
#include "param.hpp"

#include <string>
#include <vector>

namespace physdiff {

class Linear
{
public:
  Linear() = default;
  Linear(ParamStore &store, std::string const &name, Index in, Index out, Rng &rng, bool bias = true);

  Tensor forward(Tensor const &x) const;
  /// x is the forward input.
  Tensor backward(Tensor const &x, Tensor const &dy) const;

  Param &weight() const { return *w_; }
  /// Throws ContractError for a bias-free layer.
  Param &bias() const;
  bool has_bias() const { return b_ != nullptr; }
  Index in_dim() const { return w_->value.rows(); }
  Index out_dim() const { return w_->value.cols(); }

private:
  Param *w_ = nullptr;
  Param *b_ = nullptr;
};

class LayerNorm
{
public:
  using Cache = LayerNormCache<double>;

  LayerNorm() = default;
  LayerNorm(ParamStore &store, std::string const &name, Index dim);

  Tensor forward(Tensor const &x, Cache &cache) const;
  Tensor backward(Cache const &cache, Tensor const &dy) const;

private:
  Param *gamma_ = nullptr;
  Param *beta_ = nullptr;
};

/// Multi-head attention with biased Q/V/O projections and a bias-free key
/// projection (a key bias shifts every score in a row equally and cancels in the
/// softmax). Keys and values are projected separately (project_kv) so a fixed
/// memory can be projected once and reused across many queries.
class MultiHeadAttention
{
public:
  struct Memory
  {
    Tensor k, v;
  };
  struct Cache
  {
    Tensor xq, q, concat;
    std::vector<AttentionCache<double>> heads;
  };
  struct Grads
  {
    Tensor dxq, dk, dv;
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore &store, std::string const &name, Index dim, Index heads, Rng &rng);

  Memory project_kv(Tensor const &xkv) const;
  Tensor forward(Tensor const &xq, Memory const &mem, Cache &cache) const;
  /// Forward pass without a cache. With group > 0 the query and memory rows
  /// are split into consecutive blocks of `group` rows and block i attends to
  /// memory block i only; with group == 0 every query sees the whole memory.
  Tensor infer(Tensor const &xq, Memory const &mem, Index group = 0) const;
  Grads backward(Cache const &cache, Tensor const &dout) const;
  /// Gradient w.r.t. the raw key/value input given dk, dv from backward.
  Tensor backward_kv(Tensor const &xkv, Tensor const &dk, Tensor const &dv) const;

  Linear &out_proj() { return wo_; }

private:
  Linear wq_, wk_, wv_, wo_;
  Index heads_ = 1;
};

/// Two-layer GELU MLP.
class FeedForward
{
public:
  struct Cache
  {
    Tensor x, pre, act;
  };

  FeedForward() = default;
  FeedForward(ParamStore &store, std::string const &name, Index dim, Index hidden, Index out, Rng &rng);

  Tensor forward(Tensor const &x, Cache &cache) const;
  Tensor backward(Cache const &cache, Tensor const &dy) const;

  Linear &second() { return l2_; }

private:
  Linear l1_, l2_;
};

/// Pre-layer-norm Transformer encoder block:
///   x1 = x + SelfAttn(LN(x)); out = x1 + FFN(LN(x1))
class EncoderBlock
{
public:
  struct Cache
  {
    LayerNorm::Cache ln1, ln2;
    Tensor a, b;
    MultiHeadAttention::Cache attn;
    FeedForward::Cache ffn;
  };

  EncoderBlock() = default;
  EncoderBlock(ParamStore &store, std::string const &name, Index dim, Index heads, Index ffn_hidden, Rng &rng);

  Tensor forward(Tensor const &x, Cache &cache) const;
  Tensor backward(Cache const &cache, Tensor const &dy) const;

private:
  LayerNorm ln1_, ln2_;
  MultiHeadAttention attn_;
  FeedForward ffn_;
};

/// 1-D convolution over the row (time) axis, kernel 3, zero same-padding.
/// Implemented as a dense map over [x_{i-1}, x_i, x_{i+1}].
class Conv1d
{
public:
  Conv1d() = default;
  Conv1d(ParamStore &store, std::string const &name, Index in, Index out, Rng &rng);

  static Tensor unfold(Tensor const &x);
  static Tensor fold(Tensor const &dcols, Index channels);

  Tensor forward(Tensor const &x) const;
  Tensor backward(Tensor const &x, Tensor const &dy) const;

  Linear &linear() { return lin_; }

private:
  Linear lin_;
};

/// GRU over a sequence (rows), starting from h0 = 0, returning the final state.
class Gru
{
public:
  struct Cache
  {
    std::vector<GruCache<double>> steps;
  };

  Gru() = default;
  Gru(ParamStore &store, std::string const &name, Index in, Index hidden, Rng &rng);

  Tensor forward(Tensor const &seq, Cache &cache) const;
  /// Returns d(seq).
  Tensor backward(Cache const &cache, Tensor const &dh_final) const;

  Index hidden() const { return uh_->value.rows(); }

private:
  Param *wx_ = nullptr;
  Param *uh_ = nullptr;
  Param *b_ = nullptr;
};

} // namespace physdiff
