#pragma once

#include "piga.hpp"

#include <vector>

namespace physdiff {

/// Pre-LN decoder block:
///   X1 = X + SelfAttn(LN(X))
///   Xc = X1 + CrossAttn(LN(X1), c)
///   X2 = Xc + PIGA(LN(Xc))        (X2 = Xc when PIGA is disabled)
///   out = X2 + FFN(LN(X2))
class DecoderBlock
{
public:
  using Memory = MultiHeadAttention::Memory;

  struct Cache
  {
    LayerNorm::Cache ln1, ln2, ln3, ln4;
    Tensor a, b, p, d;
    MultiHeadAttention::Cache self_attn, cross_attn;
    Piga::Cache piga;
    FeedForward::Cache ffn;
  };

  DecoderBlock() = default;
  DecoderBlock(ParamStore &store, std::string const &name, Index dim, Index heads, Index ffn_hidden, bool piga,
               Rng &rng);

  /// Cross-attention keys/values of the context memory.
  Memory project_memory(Tensor const &context) const { return cross_.project_kv(context); }

  Tensor forward(Tensor const &x, Memory const &mem, Cache &cache) const;
  /// Cache-free forward over sequences of `group` rows stacked vertically, all
  /// attending to the same memory.
  Tensor infer(Tensor const &x, Memory const &mem, Index group,
               std::array<Tensor, kNumTasks> *piga_streams = nullptr) const;
  /// Returns dX; adds the memory key/value gradients into dmem.
  Tensor backward(Cache const &cache, Tensor const &dy, TaskMask const &barred, Memory &dmem) const;
  /// Gradient w.r.t. the context given accumulated memory gradients.
  Tensor memory_backward(Tensor const &context, Memory const &dmem) const
  {
    return cross_.backward_kv(context, dmem.k, dmem.v);
  }

  bool has_piga() const { return piga_enabled_; }
  Piga &piga() { return piga_; }
  Piga const &piga() const { return piga_; }
  MultiHeadAttention &self_attention() { return self_; }
  MultiHeadAttention &cross_attention() { return cross_; }
  FeedForward &ffn() { return ffn_; }

private:
  LayerNorm ln1_, ln2_, ln3_, ln4_;
  MultiHeadAttention self_, cross_;
  Piga piga_;
  FeedForward ffn_;
  bool piga_enabled_ = true;
};

/// The denoising network: input projection of z_t, learned sequence position
/// embeddings, decoder blocks, final layer norm and an output head back to the
/// latent width.
class EpsilonNet
{
public:
  using Memory = DecoderBlock::Memory;

  struct Cache
  {
    Tensor z, out_in;
    std::vector<DecoderBlock::Cache> blocks;
    LayerNorm::Cache ln;
  };

  EpsilonNet() = default;
  EpsilonNet(ParamStore &store, std::string const &name, Index horizon, Index latent, Index dim, Index heads,
             Index ffn_hidden, Index blocks, bool piga, Rng &rng);

  std::vector<Memory> project_memories(Tensor const &context) const;
  Tensor forward(Tensor const &zt, std::vector<Memory> const &mems, Cache &cache) const;
  /// epsilon_theta for several latents at once: zt stacks horizon-row latents
  /// vertically and the result stacks their predictions the same way.
  /// `piga_streams` receives the last block's gated streams.
  Tensor infer(Tensor const &zt, std::vector<Memory> const &mems,
               std::array<Tensor, kNumTasks> *piga_streams = nullptr) const;
  /// Returns dz_t; adds per-block memory gradients into dmems (same layout as mems).
  Tensor backward(Cache const &cache, Tensor const &deps, TaskMask const &barred, std::vector<Memory> &dmems) const;
  /// Context gradient from accumulated memory gradients.
  Tensor memory_backward(Tensor const &context, std::vector<Memory> const &dmems) const;

  std::vector<DecoderBlock> &blocks() { return blocks_; }
  std::vector<DecoderBlock> const &blocks() const { return blocks_; }
  Linear &head() { return head_; }

private:
  Linear in_;
  Param *pos_ = nullptr;
  std::vector<DecoderBlock> blocks_;
  LayerNorm ln_;
  Linear head_;
};

} // namespace physdiff
