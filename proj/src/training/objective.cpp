#include "physdiff/training/objective.hpp"

#include <cmath>

namespace physdiff {

NoiseDraw draw_noise(PhysDiffModel const &model, Rng &rng)
{
  NoiseDraw d;
  d.t = static_cast<int>(rng.uniform_int(1, model.schedule().steps()));
  d.eps = rng.normal_tensor(model.config().horizon, model.config().d_embedding);
  return d;
}

namespace {

struct Forward
{
  LatentCodec::EncodeCache enc;
  ContextEncoder::StaticCache stat;
  ContextEncoder::FuseCache fuse;
  Tensor context;
  std::vector<EpsilonNet::Memory> mems;
  EpsilonNet::Cache net;
  Tensor zt, eps_hat, z0_hat;
  LatentCodec::DecodeCache dec;
  Tensor x_hat;
  ExampleLoss loss;
};

void run_forward(PhysDiffModel const &model, Sample const &s, NoiseDraw const &d, Forward &f)
{
  NoiseSchedule const &sched = model.schedule();
  Tensor const z0 = model.codec().encode(s.target, f.enc);
  f.zt = forward_diffuse(z0, d.t, d.eps, sched);
  Tensor const stat = model.static_tokens(s, &f.stat);
  f.context = model.context().fuse(stat, d.t, &f.fuse);
  f.mems = model.epsilon().project_memories(f.context);
  f.eps_hat = model.epsilon().forward(f.zt, f.mems, f.net);
  f.z0_hat = predict_x0(f.zt, d.t, f.eps_hat, sched);
  f.x_hat = model.codec().decode(f.z0_hat, f.dec);
  f.loss.diff = diffusion_loss(d.eps, f.eps_hat);
  f.loss.recon = recon_loss(f.x_hat, s.target);
  if (!std::isfinite(f.loss.diff) || !std::isfinite(f.loss.recon.total())) {
    throw DivergenceError("non-finite loss for track " + s.track_id + " origin " + std::to_string(s.origin_time) +
                          " at step t=" + std::to_string(d.t));
  }
}

std::vector<EpsilonNet::Memory> zero_memories(std::vector<EpsilonNet::Memory> const &mems)
{
  std::vector<EpsilonNet::Memory> out;
  out.reserve(mems.size());
  for (auto const &m : mems) {
    out.push_back({Tensor::Zero(m.k.rows(), m.k.cols()), Tensor::Zero(m.v.rows(), m.v.cols())});
  }
  return out;
}

} // namespace

ExampleLoss evaluate_example(PhysDiffModel const &model, Sample const &sample, NoiseDraw const &draw)
{
  Forward f;
  run_forward(model, sample, draw, f);
  return f.loss;
}

ExampleLoss accumulate_example(PhysDiffModel &model, Sample const &s, NoiseDraw const &d, ObjectiveOptions const &opts,
                               double w_diff, double w_recon)
{
  Forward f;
  run_forward(model, s, d, f);

  NoiseSchedule const &sched = model.schedule();
  double const ab = sched.alpha_bar(d.t);
  double const sqrt_ab = std::sqrt(ab);
  // z0_hat = (z_t - sqrt(1 - ab) eps_hat) / sqrt(ab)
  double const dz0hat_deps = -std::sqrt(1.0 - ab) / sqrt_ab;

  EpsilonNet const &net = model.epsilon();
  auto dmems = zero_memories(f.mems);
  Index const n = f.zt.rows(), dlat = f.zt.cols();
  Tensor dzt_diff = Tensor::Zero(n, dlat);
  Tensor dzt_recon = Tensor::Zero(n, dlat);

  if (opts.terms[kTermDiff]) {
    Tensor const deps = w_diff * diffusion_loss_grad(d.eps, f.eps_hat);
    dzt_diff += net.backward(f.net, deps, kNoBarrier, dmems);
  }

  // Reconstruction terms: one backward per task when routed, one combined otherwise.
  Tensor dz0hat_all = Tensor::Zero(n, dlat);
  for (std::size_t task = 0; task < kNumTasks; ++task) {
    if (!opts.terms[kTermTraj + task]) { continue; }
    Tensor const dx = w_recon * recon_component_grad(f.x_hat, s.target, task);
    Tensor const dz0hat = model.codec().decode_backward(f.dec, dx);
    if (opts.routing) {
      dzt_recon += net.backward(f.net, dz0hat_deps * dz0hat, routing_barrier(task), dmems);
    }
    dz0hat_all += dz0hat;
  }
  if (!opts.routing && !dz0hat_all.isZero(0)) {
    dzt_recon += net.backward(f.net, dz0hat_deps * dz0hat_all, kNoBarrier, dmems);
  }
  dzt_recon += dz0hat_all / sqrt_ab;

  Tensor dz0 = sqrt_ab * dzt_recon;
  if (!opts.latent_stop_grad) { dz0 += sqrt_ab * dzt_diff; }
  model.codec().encode_backward(f.enc, dz0);

  Tensor const dctx = net.memory_backward(f.context, dmems);
  Tensor const dstat = model.context().fuse_backward(f.fuse, dctx);
  model.context().static_backward(f.stat, dstat);
  return f.loss;
}

namespace {
void check_batch(std::vector<Sample const *> const &batch, std::vector<NoiseDraw> const &draws)
{
  if (batch.empty()) { throw ContractError("empty training batch"); }
  if (batch.size() != draws.size()) { throw ContractError("batch and noise draws differ in size"); }
}

BatchLoss finish(BatchLoss b, double s_diff, double s_recon, double count)
{
  b.diff /= count;
  b.traj /= count;
  b.wind /= count;
  b.pres /= count;
  b.total = total_loss(b.diff, b.recon(), s_diff, s_recon);
  return b;
}
} // namespace

BatchLoss batch_gradient(PhysDiffModel &model, std::vector<Sample const *> const &batch,
                         std::vector<NoiseDraw> const &draws, ObjectiveOptions const &opts)
{
  check_batch(batch, draws);
  model.params().zero_grad();
  double const s_d = model.log_sigma_diff().value(0, 0);
  double const s_r = model.log_sigma_recon().value(0, 0);
  double const count = static_cast<double>(batch.size());
  double const w_d = uncertainty_weight(s_d) / count;
  double const w_r = uncertainty_weight(s_r) / count;

  BatchLoss sum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ExampleLoss const l = accumulate_example(model, *batch[i], draws[i], opts, w_d, w_r);
    sum.diff += l.diff;
    sum.traj += l.recon.traj;
    sum.wind += l.recon.wind;
    sum.pres += l.recon.pres;
  }
  BatchLoss const out = finish(sum, s_d, s_r, count);
  // Only the terms that were backpropagated contribute to the log-sigma gradients.
  double const l_d = opts.terms[kTermDiff] ? out.diff : 0.0;
  double const l_r = (opts.terms[kTermTraj] ? out.traj : 0.0) + (opts.terms[kTermWind] ? out.wind : 0.0) +
                     (opts.terms[kTermPres] ? out.pres : 0.0);
  auto const g = total_loss_grad(l_d, l_r, s_d, s_r);
  model.log_sigma_diff().grad(0, 0) += g.s_diff;
  model.log_sigma_recon().grad(0, 0) += g.s_recon;
  return out;
}

BatchLoss batch_loss(PhysDiffModel const &model, std::vector<Sample const *> const &batch,
                     std::vector<NoiseDraw> const &draws)
{
  check_batch(batch, draws);
  BatchLoss sum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ExampleLoss const l = evaluate_example(model, *batch[i], draws[i]);
    sum.diff += l.diff;
    sum.traj += l.recon.traj;
    sum.wind += l.recon.wind;
    sum.pres += l.recon.pres;
  }
  return finish(sum, model.log_sigma_diff(), model.log_sigma_recon(), static_cast<double>(batch.size()));
}

GradCheckResult objective_gradient_check(PhysDiffModel &model, std::vector<Sample const *> const &batch,
                                         std::vector<NoiseDraw> const &draws, std::size_t samples, double eps,
                                         Rng &rng)
{
  ObjectiveOptions opts;
  opts.routing = false;
  opts.latent_stop_grad = false;
  batch_gradient(model, batch, draws, opts);
  std::vector<Param *> params;
  for (auto &p : model.params()) {
    params.push_back(p.get());
  }
  return gradient_check([&] { return batch_loss(model, batch, draws).total; }, params, eps, samples, rng);
}

} // namespace physdiff
