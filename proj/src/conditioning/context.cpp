#include "physdiff/conditioning/context.hpp"

#include <cmath>

namespace physdiff {

Tensor timestep_embedding(double t, Index dim)
{
  Tensor e(1, dim);
  for (Index i = 0; i < dim; ++i) {
    Index const k = i / 2;
    double const freq = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(dim));
    e(0, i) = (i % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
  }
  return e;
}

Tensor patchify(Tensor const &grid, Index height, Index width, Index patch)
{
  if (patch < 1 || height % patch != 0 || width % patch != 0) {
    throw ConfigError("patchify: " + std::to_string(height) + "x" + std::to_string(width) +
                      " grid is not divisible into " + std::to_string(patch) + "x" + std::to_string(patch) +
                      " patches");
  }
  if (grid.cols() != height * width) {
    throw DimensionError("patchify: grid " + shape_str(grid) + " vs " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  Index const ph = height / patch, pw = width / patch, c = grid.rows();
  Tensor out(ph * pw, c * patch * patch);
  for (Index py = 0; py < ph; ++py) {
    for (Index px = 0; px < pw; ++px) {
      Index const row = py * pw + px;
      Index col = 0;
      for (Index ch = 0; ch < c; ++ch) {
        for (Index y = 0; y < patch; ++y) {
          for (Index x = 0; x < patch; ++x) {
            out(row, col++) = grid(ch, (py * patch + y) * width + px * patch + x);
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

HistoryEncoder::HistoryEncoder(ParamStore &store, std::string const &name, Index attrs, Index dim, Rng &rng)
  : gru_(store, name + ".gru", attrs, dim, rng)
  , proj_(store, name + ".proj", dim, dim, rng)
{
}

Tensor HistoryEncoder::forward(Tensor const &history, Cache &cache) const
{
  if (history.rows() < 1) { throw ContractError("encode_history: empty history (M = 0)"); }
  cache.h = gru_.forward(history, cache.gru);
  return proj_.forward(cache.h);
}

void HistoryEncoder::backward(Cache const &cache, Tensor const &dtoken) const
{
  gru_.backward(cache.gru, proj_.backward(cache.h, dtoken));
}

// ---------------------------------------------------------------------------

EnvEncoder::EnvEncoder(ParamStore &store, std::string const &name, Index channels, Index height, Index width,
                       Index patch, Index dim, Index heads, Index ffn_hidden, Rng &rng)
  : embed_(store, name + ".patch_embed", channels * patch * patch, dim, rng)
  , kind_(&store.add(name + ".kind_embed", 2, dim))
  , block_(store, name + ".block", dim, heads, ffn_hidden, rng)
  , height_(height)
  , width_(width)
  , patch_(patch)
{
  if (patch < 1 || height % patch != 0 || width % patch != 0) {
    throw ConfigError("env encoder: grid " + std::to_string(height) + "x" + std::to_string(width) +
                      " not divisible by patch " + std::to_string(patch));
  }
  init::normal(kind_->value, rng, 0.02);
}

Tensor EnvEncoder::forward(Tensor const &grid, FieldKind kind, Cache &cache) const
{
  cache.patches = patchify(grid, height_, width_, patch_);
  cache.kind = kind == FieldKind::future ? 1 : 0;
  Tensor tokens = embed_.forward(cache.patches);
  tokens.rowwise() += kind_->value.row(cache.kind);
  Tensor const y = block_.forward(tokens, cache.block);
  cache.count = y.rows();
  return y.colwise().mean();
}

void EnvEncoder::backward(Cache const &cache, Tensor const &dtoken) const
{
  Tensor const dy = dtoken.replicate(cache.count, 1) / static_cast<double>(cache.count);
  Tensor const dtokens = block_.backward(cache.block, dy);
  kind_->grad.row(cache.kind) += dtokens.colwise().sum();
  embed_.backward(cache.patches, dtokens);
}

// ---------------------------------------------------------------------------

ContextEncoder::ContextEncoder(ParamStore &store, std::string const &name, Index attrs, Index fields, Index channels,
                               Index height, Index width, Index patch, Index dim, Index heads, Index ffn_hidden,
                               Index blocks, Rng &rng)
  : history_(store, name + ".history", attrs, dim, rng)
  , env_(store, name + ".env", channels, height, width, patch, dim, heads, ffn_hidden, rng)
  , time_proj_(store, name + ".time_proj", dim, dim, rng)
  , null_(&store.add(name + ".null_token", 1, dim))
  , pos_(&store.add(name + ".slot_embed", fields + 2, dim))
{
  init::normal(null_->value, rng, 0.02);
  init::normal(pos_->value, rng, 0.02);
  for (Index b = 0; b < blocks; ++b) {
    blocks_.emplace_back(store, name + ".block" + std::to_string(b), dim, heads, ffn_hidden, rng);
  }
  ln_ = LayerNorm(store, name + ".ln_out", dim);
}

Tensor ContextEncoder::encode_static(Tensor const &history, std::vector<Tensor> const &env,
                                     std::vector<FieldKind> const &kinds, EnvMask mask, StaticCache *cache) const
{
  Index const fields = slots() - 2;
  if (static_cast<Index>(env.size()) != fields || kinds.size() != env.size()) {
    throw DimensionError("context: expected " + std::to_string(fields) + " env fields, got " +
                         std::to_string(env.size()));
  }
  StaticCache local;
  StaticCache &c = cache ? *cache : local;
  Tensor tokens(fields + 1, dim());
  tokens.row(0) = history_.forward(history, c.history);
  c.env.assign(env.size(), {});
  c.masked.assign(env.size(), false);
  for (std::size_t i = 0; i < env.size(); ++i) {
    bool const keep = kinds[i] == FieldKind::future ? mask.future : mask.historical;
    auto const row = static_cast<Index>(i) + 1;
    if (keep) {
      tokens.row(row) = env_.forward(env[i], kinds[i], c.env[i]);
    } else {
      c.masked[i] = true;
      tokens.row(row) = null_->value.row(0);
    }
  }
  return tokens;
}

void ContextEncoder::static_backward(StaticCache const &c, Tensor const &dstatic) const
{
  history_.backward(c.history, dstatic.row(0));
  for (std::size_t i = 0; i < c.env.size(); ++i) {
    auto const row = static_cast<Index>(i) + 1;
    if (c.masked[i]) {
      null_->grad.row(0) += dstatic.row(row);
    } else {
      env_.backward(c.env[i], dstatic.row(row));
    }
  }
}

Tensor ContextEncoder::fuse(Tensor const &static_tokens, int t, FuseCache *cache) const
{
  FuseCache local;
  FuseCache &c = cache ? *cache : local;
  Index const n = static_tokens.rows();
  if (n + 1 != slots()) { throw DimensionError("context: static tokens " + shape_str(static_tokens)); }
  c.temb = timestep_embedding(static_cast<double>(t), dim());
  Tensor x(n + 1, dim());
  x.topRows(n) = static_tokens;
  x.row(n) = time_proj_.forward(c.temb);
  x += pos_->value;
  c.blocks.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    x = blocks_[b].forward(x, c.blocks[b]);
  }
  return ln_.forward(x, c.ln);
}

Tensor ContextEncoder::fuse_backward(FuseCache const &c, Tensor const &dc) const
{
  Tensor dx = ln_.backward(c.ln, dc);
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    dx = blocks_[b].backward(c.blocks[b], dx);
  }
  pos_->grad += dx;
  Index const n = dx.rows() - 1;
  time_proj_.backward(c.temb, dx.row(n));
  return dx.topRows(n);
}

} // namespace physdiff
