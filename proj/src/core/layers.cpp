#include "physdiff/core/layers.hpp"

namespace physdiff {

// ---------------------------------------------------------------------------

Linear::Linear(ParamStore &store, std::string const &name, Index in, Index out, Rng &rng, bool bias)
  : w_(&store.add(name + ".W", in, out))
  , b_(bias ? &store.add(name + ".b", 1, out) : nullptr)
{
  init::glorot_uniform(w_->value, rng);
}

Param &Linear::bias() const
{
  if (b_ == nullptr) { throw ContractError("linear layer " + w_->name + " has no bias"); }
  return *b_;
}

Tensor Linear::forward(Tensor const &x) const
{
  if (b_ != nullptr) { return dense(x, w_->value, b_->value); }
  if (x.cols() != w_->value.rows()) { throw DimensionError("dense: x " + shape_str(x) + ", W " + shape_str(w_->value)); }
  return x * w_->value;
}

Tensor Linear::backward(Tensor const &x, Tensor const &dy) const
{
  w_->grad.noalias() += x.transpose() * dy;
  if (b_ != nullptr) { b_->grad += dy.colwise().sum(); }
  return dy * w_->value.transpose();
}

// ---------------------------------------------------------------------------

LayerNorm::LayerNorm(ParamStore &store, std::string const &name, Index dim)
  : gamma_(&store.add(name + ".gamma", 1, dim))
  , beta_(&store.add(name + ".beta", 1, dim))
{
  gamma_->value.setOnes();
}

Tensor LayerNorm::forward(Tensor const &x, Cache &cache) const
{
  return layer_norm(x, gamma_->value, beta_->value, 1e-5, &cache);
}

Tensor LayerNorm::backward(Cache const &cache, Tensor const &dy) const
{
  return layer_norm_backward(cache, gamma_->value, dy, &gamma_->grad, &beta_->grad);
}

// ---------------------------------------------------------------------------

MultiHeadAttention::MultiHeadAttention(ParamStore &store, std::string const &name, Index dim, Index heads, Rng &rng)
  : wq_(store, name + ".q", dim, dim, rng)
  , wk_(store, name + ".k", dim, dim, rng, false)
  , wv_(store, name + ".v", dim, dim, rng)
  , wo_(store, name + ".o", dim, dim, rng)
  , heads_(heads)
{
  if (heads < 1 || dim % heads != 0) {
    throw ConfigError(name + ": dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  }
}

MultiHeadAttention::Memory MultiHeadAttention::project_kv(Tensor const &xkv) const
{
  return {wk_.forward(xkv), wv_.forward(xkv)};
}

Tensor MultiHeadAttention::infer(Tensor const &xq, Memory const &mem, Index group) const
{
  Tensor const q = wq_.forward(xq);
  Index const dh = q.cols() / heads_;
  Index const blocks = group > 0 ? q.rows() / group : 1;
  Index const qrows = group > 0 ? group : q.rows();
  Index const krows = group > 0 ? group : mem.k.rows();
  if (group > 0 && (q.rows() % group != 0 || mem.k.rows() != q.rows())) {
    throw DimensionError("grouped attention: " + shape_str(q) + " queries, " + shape_str(mem.k) + " keys, group " +
                         std::to_string(group));
  }
  Tensor concat(q.rows(), q.cols());
  for (Index g = 0; g < blocks; ++g) {
    Index const kr = group > 0 ? g * group : 0;
    for (Index h = 0; h < heads_; ++h) {
      concat.block(g * qrows, h * dh, qrows, dh) =
          attention(Tensor(q.block(g * qrows, h * dh, qrows, dh)), Tensor(mem.k.block(kr, h * dh, krows, dh)),
                    Tensor(mem.v.block(kr, h * dh, krows, dh)));
    }
  }
  return wo_.forward(concat);
}

Tensor MultiHeadAttention::forward(Tensor const &xq, Memory const &mem, Cache &cache) const
{
  cache.xq = xq;
  cache.q = wq_.forward(xq);
  Index const dh = cache.q.cols() / heads_;
  cache.heads.resize(static_cast<std::size_t>(heads_));
  cache.concat.resize(xq.rows(), cache.q.cols());
  for (Index h = 0; h < heads_; ++h) {
    Tensor const qh = cache.q.middleCols(h * dh, dh);
    Tensor const kh = mem.k.middleCols(h * dh, dh);
    Tensor const vh = mem.v.middleCols(h * dh, dh);
    cache.concat.middleCols(h * dh, dh) = attention(qh, kh, vh, &cache.heads[static_cast<std::size_t>(h)]);
  }
  return wo_.forward(cache.concat);
}

MultiHeadAttention::Grads MultiHeadAttention::backward(Cache const &cache, Tensor const &dout) const
{
  Tensor const dconcat = wo_.backward(cache.concat, dout);
  Index const dh = dconcat.cols() / heads_;
  Index const nk = cache.heads.front().k.rows();
  Tensor dq(dconcat.rows(), dconcat.cols());
  Grads g;
  g.dk.resize(nk, dconcat.cols());
  g.dv.resize(nk, dconcat.cols());
  for (Index h = 0; h < heads_; ++h) {
    auto const hg = attention_backward(cache.heads[static_cast<std::size_t>(h)],
                                       Tensor(dconcat.middleCols(h * dh, dh)));
    dq.middleCols(h * dh, dh) = hg.dq;
    g.dk.middleCols(h * dh, dh) = hg.dk;
    g.dv.middleCols(h * dh, dh) = hg.dv;
  }
  g.dxq = wq_.backward(cache.xq, dq);
  return g;
}

Tensor MultiHeadAttention::backward_kv(Tensor const &xkv, Tensor const &dk, Tensor const &dv) const
{
  Tensor dx = wk_.backward(xkv, dk);
  dx += wv_.backward(xkv, dv);
  return dx;
}

// ---------------------------------------------------------------------------

FeedForward::FeedForward(ParamStore &store, std::string const &name, Index dim, Index hidden, Index out, Rng &rng)
  : l1_(store, name + ".fc1", dim, hidden, rng)
  , l2_(store, name + ".fc2", hidden, out, rng)
{
}

Tensor FeedForward::forward(Tensor const &x, Cache &cache) const
{
  cache.x = x;
  cache.pre = l1_.forward(x);
  cache.act = gelu(cache.pre);
  return l2_.forward(cache.act);
}

Tensor FeedForward::backward(Cache const &cache, Tensor const &dy) const
{
  Tensor const dact = l2_.backward(cache.act, dy);
  return l1_.backward(cache.x, gelu_backward(cache.pre, dact));
}

// ---------------------------------------------------------------------------

EncoderBlock::EncoderBlock(ParamStore &store, std::string const &name, Index dim, Index heads, Index ffn_hidden,
                           Rng &rng)
  : ln1_(store, name + ".ln1", dim)
  , ln2_(store, name + ".ln2", dim)
  , attn_(store, name + ".attn", dim, heads, rng)
  , ffn_(store, name + ".ffn", dim, ffn_hidden, dim, rng)
{
}

Tensor EncoderBlock::forward(Tensor const &x, Cache &cache) const
{
  cache.a = ln1_.forward(x, cache.ln1);
  Tensor x1 = x + attn_.forward(cache.a, attn_.project_kv(cache.a), cache.attn);
  cache.b = ln2_.forward(x1, cache.ln2);
  return x1 + ffn_.forward(cache.b, cache.ffn);
}

Tensor EncoderBlock::backward(Cache const &cache, Tensor const &dy) const
{
  Tensor dx1 = dy + ln2_.backward(cache.ln2, ffn_.backward(cache.ffn, dy));
  auto const g = attn_.backward(cache.attn, dx1);
  Tensor da = g.dxq + attn_.backward_kv(cache.a, g.dk, g.dv);
  return dx1 + ln1_.backward(cache.ln1, da);
}

// ---------------------------------------------------------------------------

Conv1d::Conv1d(ParamStore &store, std::string const &name, Index in, Index out, Rng &rng)
  : lin_(store, name, 3 * in, out, rng)
{
}

Tensor Conv1d::unfold(Tensor const &x)
{
  Index const n = x.rows(), c = x.cols();
  Tensor cols = Tensor::Zero(n, 3 * c);
  for (Index i = 0; i < n; ++i) {
    if (i > 0) { cols.block(i, 0, 1, c) = x.row(i - 1); }
    cols.block(i, c, 1, c) = x.row(i);
    if (i + 1 < n) { cols.block(i, 2 * c, 1, c) = x.row(i + 1); }
  }
  return cols;
}

Tensor Conv1d::fold(Tensor const &dcols, Index c)
{
  Index const n = dcols.rows();
  Tensor dx = Tensor::Zero(n, c);
  for (Index i = 0; i < n; ++i) {
    if (i > 0) { dx.row(i - 1) += dcols.block(i, 0, 1, c); }
    dx.row(i) += dcols.block(i, c, 1, c);
    if (i + 1 < n) { dx.row(i + 1) += dcols.block(i, 2 * c, 1, c); }
  }
  return dx;
}

Tensor Conv1d::forward(Tensor const &x) const
{
  if (3 * x.cols() != lin_.in_dim()) {
    throw DimensionError("conv1d: input " + shape_str(x) + " expects " + std::to_string(lin_.in_dim() / 3) +
                         " channels");
  }
  return lin_.forward(unfold(x));
}

Tensor Conv1d::backward(Tensor const &x, Tensor const &dy) const
{
  return fold(lin_.backward(unfold(x), dy), x.cols());
}

// ---------------------------------------------------------------------------

Gru::Gru(ParamStore &store, std::string const &name, Index in, Index hidden, Rng &rng)
  : wx_(&store.add(name + ".Wx", in, 3 * hidden))
  , uh_(&store.add(name + ".Uh", hidden, 3 * hidden))
  , b_(&store.add(name + ".b", 1, 3 * hidden))
{
  for (Index g = 0; g < 3; ++g) {
    Tensor wx(in, hidden), uh(hidden, hidden);
    init::glorot_uniform(wx, rng);
    init::orthogonal(uh, rng);
    wx_->value.middleCols(g * hidden, hidden) = wx;
    uh_->value.middleCols(g * hidden, hidden) = uh;
  }
}

Tensor Gru::forward(Tensor const &seq, Cache &cache) const
{
  if (seq.rows() < 1) { throw DimensionError("gru: empty sequence"); }
  GruWeights<double> const w{wx_->value, uh_->value, b_->value};
  cache.steps.assign(static_cast<std::size_t>(seq.rows()), {});
  Tensor h = Tensor::Zero(1, hidden());
  for (Index i = 0; i < seq.rows(); ++i) {
    h = gru_cell(Tensor(seq.row(i)), h, w, &cache.steps[static_cast<std::size_t>(i)]);
  }
  return h;
}

Tensor Gru::backward(Cache const &cache, Tensor const &dh_final) const
{
  GruWeights<double> const w{wx_->value, uh_->value, b_->value};
  Index const n = static_cast<Index>(cache.steps.size());
  Tensor dseq(n, wx_->value.rows());
  Tensor dh = dh_final;
  for (Index i = n - 1; i >= 0; --i) {
    auto g = gru_cell_backward(cache.steps[static_cast<std::size_t>(i)], w, dh, wx_->grad, uh_->grad, b_->grad);
    dseq.row(i) = g.dx;
    dh = std::move(g.dh);
  }
  return dseq;
}

} // namespace physdiff
