#include "physdiff/decoder/epsilon_net.hpp"

namespace physdiff {

DecoderBlock::DecoderBlock(ParamStore &store, std::string const &name, Index dim, Index heads, Index ffn_hidden,
                           bool piga, Rng &rng)
  : ln1_(store, name + ".ln1", dim)
  , ln2_(store, name + ".ln2", dim)
  , self_(store, name + ".self_attn", dim, heads, rng)
  , cross_(store, name + ".cross_attn", dim, heads, rng)
  , piga_enabled_(piga)
{
  if (piga) {
    ln3_ = LayerNorm(store, name + ".ln3", dim);
    piga_ = Piga(store, name + ".piga", dim, rng);
  }
  ln4_ = LayerNorm(store, name + ".ln4", dim);
  ffn_ = FeedForward(store, name + ".ffn", dim, ffn_hidden, dim, rng);
}

Tensor DecoderBlock::forward(Tensor const &x, Memory const &mem, Cache &c) const
{
  c.a = ln1_.forward(x, c.ln1);
  Tensor x1 = x + self_.forward(c.a, self_.project_kv(c.a), c.self_attn);
  c.b = ln2_.forward(x1, c.ln2);
  Tensor x2 = x1 + cross_.forward(c.b, mem, c.cross_attn);
  if (piga_enabled_) {
    c.p = ln3_.forward(x2, c.ln3);
    x2 += piga_.forward(c.p, c.piga);
  }
  c.d = ln4_.forward(x2, c.ln4);
  return x2 + ffn_.forward(c.d, c.ffn);
}

Tensor DecoderBlock::infer(Tensor const &x, Memory const &mem, Index group,
                          std::array<Tensor, kNumTasks> *piga_streams) const
{
  LayerNorm::Cache scratch;
  Tensor const a = ln1_.forward(x, scratch);
  Tensor x1 = x + self_.infer(a, self_.project_kv(a), group);
  Tensor x2 = x1 + cross_.infer(ln2_.forward(x1, scratch), mem);
  if (piga_enabled_) { x2 += piga_.infer(ln3_.forward(x2, scratch), group, piga_streams); }
  FeedForward::Cache ffn_scratch;
  return x2 + ffn_.forward(ln4_.forward(x2, scratch), ffn_scratch);
}

Tensor DecoderBlock::backward(Cache const &c, Tensor const &dy, TaskMask const &barred, Memory &dmem) const
{
  Tensor dx2 = dy + ln4_.backward(c.ln4, ffn_.backward(c.ffn, dy));
  if (piga_enabled_) { dx2 += ln3_.backward(c.ln3, piga_.backward(c.piga, dx2, barred)); }
  auto const cg = cross_.backward(c.cross_attn, dx2);
  dmem.k += cg.dk;
  dmem.v += cg.dv;
  Tensor dx1 = dx2 + ln2_.backward(c.ln2, cg.dxq);
  auto const sg = self_.backward(c.self_attn, dx1);
  Tensor const da = sg.dxq + self_.backward_kv(c.a, sg.dk, sg.dv);
  return dx1 + ln1_.backward(c.ln1, da);
}

// ---------------------------------------------------------------------------

EpsilonNet::EpsilonNet(ParamStore &store, std::string const &name, Index horizon, Index latent, Index dim, Index heads,
                       Index ffn_hidden, Index blocks, bool piga, Rng &rng)
  : in_(store, name + ".in_proj", latent, dim, rng)
  , pos_(&store.add(name + ".pos_embed", horizon, dim))
{
  init::normal(pos_->value, rng, 0.02);
  for (Index b = 0; b < blocks; ++b) {
    blocks_.emplace_back(store, name + ".block" + std::to_string(b), dim, heads, ffn_hidden, piga, rng);
  }
  ln_ = LayerNorm(store, name + ".ln_out", dim);
  head_ = Linear(store, name + ".head", dim, latent, rng);
}

std::vector<EpsilonNet::Memory> EpsilonNet::project_memories(Tensor const &context) const
{
  std::vector<Memory> mems;
  mems.reserve(blocks_.size());
  for (auto const &b : blocks_) {
    mems.push_back(b.project_memory(context));
  }
  return mems;
}

Tensor EpsilonNet::forward(Tensor const &zt, std::vector<Memory> const &mems, Cache &c) const
{
  if (zt.rows() != pos_->value.rows()) {
    throw DimensionError("epsilon_theta: z_t " + shape_str(zt) + " vs horizon " + std::to_string(pos_->value.rows()));
  }
  c.z = zt;
  Tensor x = in_.forward(zt) + pos_->value;
  c.blocks.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    x = blocks_[b].forward(x, mems[b], c.blocks[b]);
  }
  c.out_in = ln_.forward(x, c.ln);
  return head_.forward(c.out_in);
}

Tensor EpsilonNet::infer(Tensor const &zt, std::vector<Memory> const &mems,
                         std::array<Tensor, kNumTasks> *piga_streams) const
{
  Index const n = pos_->value.rows();
  if (zt.rows() == 0 || zt.rows() % n != 0) {
    throw DimensionError("epsilon_theta: z_t " + shape_str(zt) + " is not a stack of horizon " + std::to_string(n) +
                         " latents");
  }
  Tensor x = in_.forward(zt) + pos_->value.replicate(zt.rows() / n, 1);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    bool const last = b + 1 == blocks_.size();
    x = blocks_[b].infer(x, mems[b], n, last ? piga_streams : nullptr);
  }
  LayerNorm::Cache scratch;
  return head_.forward(ln_.forward(x, scratch));
}

Tensor EpsilonNet::backward(Cache const &c, Tensor const &deps, TaskMask const &barred,
                            std::vector<Memory> &dmems) const
{
  Tensor dx = ln_.backward(c.ln, head_.backward(c.out_in, deps));
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    dx = blocks_[b].backward(c.blocks[b], dx, barred, dmems[b]);
  }
  pos_->grad += dx;
  return in_.backward(c.z, dx);
}

Tensor EpsilonNet::memory_backward(Tensor const &context, std::vector<Memory> const &dmems) const
{
  Tensor dc = Tensor::Zero(context.rows(), context.cols());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    dc += blocks_[b].memory_backward(context, dmems[b]);
  }
  return dc;
}

} // namespace physdiff
