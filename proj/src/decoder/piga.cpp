#include "physdiff/decoder/piga.hpp"

namespace physdiff {

char const *task_name(std::size_t task)
{
  static constexpr std::array<char const *, kNumTasks> names = {"traj", "wind", "pres"};
  return names.at(task);
}

TaskMask routing_barrier(std::size_t task)
{
  TaskMask m = {true, true, true};
  m.at(task) = false;
  return m;
}

Tensor gated_fuse(Tensor const &f, Tensor const &a, Tensor const &g)
{
  require_same_shape(f, a, "gated_fuse");
  require_same_shape(f, g, "gated_fuse gate");
  return (f.array() * (1.0 - g.array()) + g.array() * a.array()).matrix();
}

std::array<std::size_t, 2> Piga::others(std::size_t task)
{
  switch (task) {
  case kTraj: return {kWindTask, kPresTask};
  case kWindTask: return {kTraj, kPresTask};
  default: return {kTraj, kWindTask};
  }
}

Piga::Piga(ParamStore &store, std::string const &name, Index dim, Rng &rng)
  : sub_(dim / 3)
{
  if (dim % 3 != 0) { throw ConfigError("piga: D_model " + std::to_string(dim) + " is not divisible by 3"); }
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    proj_[t] = Linear(store, name + ".proj_" + task_name(t), dim, sub_, rng);
  }
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    std::string const p = name + ".attn_" + task_name(t);
    wq_[t] = Linear(store, p + ".q", sub_, sub_, rng);
    wk_[t] = Linear(store, p + ".k", sub_, sub_, rng, false);
    wv_[t] = Linear(store, p + ".v", sub_, sub_, rng);
    gate1_[t] = Linear(store, name + ".gate_" + task_name(t) + ".fc1", 2 * sub_, 2 * sub_, rng);
    gate2_[t] = Linear(store, name + ".gate_" + task_name(t) + ".fc2", 2 * sub_, sub_, rng);
  }
  fuse_ = Linear(store, name + ".fuse", 3 * sub_, dim, rng);
}

std::array<Tensor, kNumTasks> Piga::decompose(Tensor const &x) const
{
  return {proj_[kTraj].forward(x), proj_[kWindTask].forward(x), proj_[kPresTask].forward(x)};
}

namespace {
Tensor stack_rows(Tensor const &a, Tensor const &b)
{
  if (a.cols() != b.cols()) { throw DimensionError("cross-task attention: " + shape_str(a) + " vs " + shape_str(b)); }
  Tensor out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

Tensor concat_cols(Tensor const &a, Tensor const &b)
{
  if (a.rows() != b.rows()) { throw DimensionError("concat: " + shape_str(a) + " vs " + shape_str(b)); }
  Tensor out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}
} // namespace

Tensor Piga::cross_task_attend(std::size_t task, Tensor const &fq, Tensor const &fa, Tensor const &fb) const
{
  Tensor const kv = stack_rows(fa, fb);
  return attention(wq_[task].forward(fq), wk_[task].forward(kv), wv_[task].forward(kv));
}

Tensor Piga::gate(std::size_t task, Tensor const &f, Tensor const &a) const
{
  return sigmoid(gate2_[task].forward(gelu(gate1_[task].forward(concat_cols(f, a)))));
}

Tensor Piga::fuse_streams(Tensor const &traj, Tensor const &wind, Tensor const &pres) const
{
  Tensor cat(traj.rows(), traj.cols() + wind.cols() + pres.cols());
  cat << traj, wind, pres;
  return fuse_.forward(cat);
}

Tensor Piga::forward(Tensor const &x, Cache &c) const
{
  c.x = x;
  auto f = decompose(x);
  Index const n = x.rows();
  c.concat.resize(n, 3 * sub_);
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    auto &s = c.s[t];
    auto const [a, b] = others(t);
    s.f = f[t];
    s.kv = stack_rows(f[a], f[b]);
    s.q = wq_[t].forward(s.f);
    s.k = wk_[t].forward(s.kv);
    s.v = wv_[t].forward(s.kv);
    s.a = attention(s.q, s.k, s.v, &s.attn);
    s.gate_in = concat_cols(s.f, s.a);
    s.gate_pre = gate1_[t].forward(s.gate_in);
    s.gate_act = gelu(s.gate_pre);
    s.g = sigmoid(gate2_[t].forward(s.gate_act));
    s.fused = gated_fuse(s.f, s.a, s.g);
    c.concat.middleCols(static_cast<Index>(t) * sub_, sub_) = s.fused;
  }
  return fuse_.forward(c.concat);
}

Tensor Piga::infer(Tensor const &x, Index group, std::array<Tensor, kNumTasks> *fused) const
{
  if (group <= 0 || x.rows() % group != 0) {
    throw DimensionError("piga: " + shape_str(x) + " is not a stack of " + std::to_string(group) + "-row sequences");
  }
  auto const f = decompose(x);
  Index const n = x.rows();
  Tensor concat(n, 3 * sub_);
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    auto const [oa, ob] = others(t);
    Tensor const q = wq_[t].forward(f[t]);
    Tensor const ka = wk_[t].forward(f[oa]), kb = wk_[t].forward(f[ob]);
    Tensor const va = wv_[t].forward(f[oa]), vb = wv_[t].forward(f[ob]);
    Tensor a(n, sub_);
    for (Index r = 0; r < n; r += group) {
      a.middleRows(r, group) = attention(Tensor(q.middleRows(r, group)),
                                         stack_rows(ka.middleRows(r, group), kb.middleRows(r, group)),
                                         stack_rows(va.middleRows(r, group), vb.middleRows(r, group)));
    }
    Tensor const g = sigmoid(gate2_[t].forward(gelu(gate1_[t].forward(concat_cols(f[t], a)))));
    concat.middleCols(static_cast<Index>(t) * sub_, sub_) = gated_fuse(f[t], a, g);
  }
  if (fused != nullptr) {
    for (std::size_t t = 0; t < kNumTasks; ++t) {
      (*fused)[t] = concat.middleCols(static_cast<Index>(t) * sub_, sub_);
    }
  }
  return fuse_.forward(concat);
}

Tensor Piga::backward(Cache const &c, Tensor const &dout, TaskMask const &barred) const
{
  Tensor const dconcat = fuse_.backward(c.concat, dout);
  Index const n = c.x.rows();
  std::array<Tensor, kNumTasks> df;
  for (auto &d : df) {
    d = Tensor::Zero(n, sub_);
  }
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    auto const &s = c.s[t];
    auto const [a, b] = others(t);
    Tensor const dfused = dconcat.middleCols(static_cast<Index>(t) * sub_, sub_);
    Tensor da = dfused.cwiseProduct(s.g);
    df[t] += dfused.cwiseProduct((1.0 - s.g.array()).matrix());
    Tensor const dg = dfused.cwiseProduct(s.a - s.f);
    Tensor const dlogit = dg.cwiseProduct((s.g.array() * (1.0 - s.g.array())).matrix());
    Tensor const dact = gate2_[t].backward(s.gate_act, dlogit);
    Tensor const dgate_in = gate1_[t].backward(s.gate_in, gelu_backward(s.gate_pre, dact));
    df[t] += dgate_in.leftCols(sub_);
    da += dgate_in.rightCols(sub_);

    auto const ag = attention_backward(s.attn, da);
    df[t] += wq_[t].backward(s.f, ag.dq);
    Tensor dkv = wk_[t].backward(s.kv, ag.dk);
    dkv += wv_[t].backward(s.kv, ag.dv);
    df[a] += dkv.topRows(n);
    df[b] += dkv.bottomRows(n);
  }
  Tensor dx = Tensor::Zero(n, c.x.cols());
  for (std::size_t t = 0; t < kNumTasks; ++t) {
    if (barred[t]) { continue; }
    dx += proj_[t].backward(c.x, df[t]);
  }
  return dx;
}

} // namespace physdiff
