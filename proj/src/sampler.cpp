#include "physdiff/sampler.hpp"

namespace physdiff {

namespace {
void check_finite(Tensor const &z, int t)
{
  if (!all_finite(z)) { throw DivergenceError("non-finite latent during sampling at step t=" + std::to_string(t)); }
}
} // namespace

Tensor ancestral_sample(NoiseSchedule const &sched, Tensor z, NoisePredictor const &predict, Rng &rng)
{
  for (int t = sched.steps(); t >= 1; --t) {
    Tensor const eps_hat = predict(z, t);
    Tensor const w = t > 1 ? rng.normal_tensor(z.rows(), z.cols()) : Tensor::Zero(z.rows(), z.cols());
    z = reverse_step(z, t, eps_hat, sched, w);
    check_finite(z, t);
  }
  return z;
}

Rng member_rng(std::uint64_t root_seed, std::size_t member) { return Rng(root_seed).derive(member); }

std::vector<Tensor> sample_members(PhysDiffModel const &model, Sample const &s, std::vector<Rng> rngs,
                                   SampleOptions const &opts)
{
  NoiseSchedule const &sched = model.schedule();
  Index const n = model.config().horizon, d = model.config().d_embedding;
  Index const members = static_cast<Index>(rngs.size());
  // members are stacked vertically, member m in rows [m n, (m + 1) n)
  Tensor z(members * n, d);
  for (Index m = 0; m < members; ++m) {
    z.middleRows(m * n, n) = rngs[static_cast<std::size_t>(m)].normal_tensor(n, d);
  }

  Tensor const stat = model.static_tokens(s);
  EpsilonNet const &net = model.epsilon();
  std::array<Tensor, kNumTasks> streams;
  bool const want_features = opts.features != nullptr && net.blocks().back().has_piga();
  if (opts.features != nullptr) { opts.features->assign(rngs.size(), TaskFeatures{}); }

  Tensor w(members * n, d);
  for (int t = sched.steps(); t >= 1; --t) {
    auto const mems = net.project_memories(model.context().fuse(stat, t, nullptr));
    Tensor const eps_hat = net.infer(z, mems, t == 1 && want_features ? &streams : nullptr);
    if (t > 1) {
      for (Index m = 0; m < members; ++m) {
        w.middleRows(m * n, n) = rngs[static_cast<std::size_t>(m)].normal_tensor(n, d);
      }
    } else {
      w.setZero();
    }
    z = reverse_step(z, t, eps_hat, sched, w);
    check_finite(z, t);
  }

  std::vector<Tensor> out;
  out.reserve(rngs.size());
  for (Index m = 0; m < members; ++m) {
    out.push_back(model.codec().decode(z.middleRows(m * n, n)));
    if (want_features) {
      for (std::size_t task = 0; task < kNumTasks; ++task) {
        (*opts.features)[static_cast<std::size_t>(m)][task] = streams[task].middleRows(m * n, n).colwise().mean();
      }
    }
  }
  return out;
}

Tensor sample(PhysDiffModel const &model, Sample const &s, Rng rng)
{
  return sample_members(model, s, {rng}).front();
}

} // namespace physdiff
