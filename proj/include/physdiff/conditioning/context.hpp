#pragma once

#include "physdiff/core/layers.hpp"
#include "physdiff/data/track.hpp"

#include <vector>

namespace physdiff {

/// Sinusoidal embedding: entry 2k is sin(t / 10000^(2k/D)), entry 2k+1 the cosine.
Tensor timestep_embedding(double t, Index dim);

/// Splits a C x (H*W) grid into non-overlapping patch x patch tiles, one row per
/// tile (tiles in row-major order, features ordered channel, row, column).
Tensor patchify(Tensor const &grid, Index height, Index width, Index patch);

/// GRU over the M normalized history rows, final state projected to D_model.
class HistoryEncoder
{
public:
  struct Cache
  {
    Gru::Cache gru;
    Tensor h;
  };

  HistoryEncoder() = default;
  HistoryEncoder(ParamStore &store, std::string const &name, Index attrs, Index dim, Rng &rng);

  Tensor forward(Tensor const &history, Cache &cache) const;
  void backward(Cache const &cache, Tensor const &dtoken) const;

private:
  Gru gru_;
  Linear proj_;
};

/// Patch-attention environment encoder: patch embedding plus a learned
/// historical/future flag, one pre-LN attention block over the patch tokens,
/// mean pooling to one token per field. Historical and future fields share
/// weights.
class EnvEncoder
{
public:
  struct Cache
  {
    Tensor patches;
    EncoderBlock::Cache block;
    Index count = 0;
    int kind = 0;
  };

  EnvEncoder() = default;
  EnvEncoder(ParamStore &store, std::string const &name, Index channels, Index height, Index width, Index patch,
             Index dim, Index heads, Index ffn_hidden, Rng &rng);

  Tensor forward(Tensor const &grid, FieldKind kind, Cache &cache) const;
  void backward(Cache const &cache, Tensor const &dtoken) const;

private:
  Linear embed_;
  Param *kind_ = nullptr; // 2 x D
  EncoderBlock block_;
  Index height_ = 0, width_ = 0, patch_ = 0;
};

/// Which environment slots carry real encodings; masked slots hold a learned
/// null token so the context length never changes.
struct EnvMask
{
  bool historical = true;
  bool future = true;
};

/// Builds the context memory: [history token, one token per env field,
/// timestep token] plus learned slot embeddings, fused by pre-LN Transformer
/// encoder blocks and a final layer norm.
///
/// The history and env tokens do not depend on the diffusion step, so they are
/// computed once per window (encode_static) and fused per step (fuse).
class ContextEncoder
{
public:
  struct StaticCache
  {
    HistoryEncoder::Cache history;
    std::vector<EnvEncoder::Cache> env;
    std::vector<bool> masked;
  };
  struct FuseCache
  {
    Tensor temb;
    std::vector<EncoderBlock::Cache> blocks;
    LayerNorm::Cache ln;
  };

  ContextEncoder() = default;
  ContextEncoder(ParamStore &store, std::string const &name, Index attrs, Index fields, Index channels, Index height,
                 Index width, Index patch, Index dim, Index heads, Index ffn_hidden, Index blocks, Rng &rng);

  /// (1 + fields) x D.
  Tensor encode_static(Tensor const &history, std::vector<Tensor> const &env, std::vector<FieldKind> const &kinds,
                       EnvMask mask, StaticCache *cache) const;
  void static_backward(StaticCache const &cache, Tensor const &dstatic) const;

  /// (2 + fields) x D context for diffusion step t.
  Tensor fuse(Tensor const &static_tokens, int t, FuseCache *cache) const;
  /// Returns the gradient w.r.t. the static tokens.
  Tensor fuse_backward(FuseCache const &cache, Tensor const &dc) const;

  Index slots() const { return pos_->value.rows(); }
  Index dim() const { return pos_->value.cols(); }

private:
  HistoryEncoder history_;
  EnvEncoder env_;
  Linear time_proj_;
  Param *null_ = nullptr; // 1 x D
  Param *pos_ = nullptr;  // slots x D
  std::vector<EncoderBlock> blocks_;
  LayerNorm ln_;
};

} // namespace physdiff
