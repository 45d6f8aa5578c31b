#pragma once

#include "physdiff/core/gradcheck.hpp"
#include "physdiff/model.hpp"
#include "physdiff/training/loss.hpp"

#include <array>
#include <vector>

namespace physdiff {

/// The random part of one training example: the diffusion step and the noise.
struct NoiseDraw
{
  int t = 1;
  Tensor eps; // N x D_embedding
};

/// t uniform in [1, T], eps standard normal.
NoiseDraw draw_noise(PhysDiffModel const &model, Rng &rng);

enum LossTerm : std::size_t
{
  kTermDiff = 0,
  kTermTraj = 1,
  kTermWind = 2,
  kTermPres = 3
};

struct ObjectiveOptions
{
  /// Backpropagate each reconstruction component with stop-gradient barriers
  /// on the other two tasks' PIGA projections.
  bool routing = true;
  /// Keep the diffusion loss from shaping the latent encoder. Without it the
  /// encoder can shrink the latent signal until the noise-prediction task
  /// becomes trivial.
  bool latent_stop_grad = true;
  /// Terms whose gradients are accumulated (losses are always reported).
  std::array<bool, 4> terms = {true, true, true, true};
};

struct ExampleLoss
{
  double diff = 0.0;
  ReconLoss recon;
};

/// Forward pass for one example and gradient accumulation into the model's
/// parameters: diffusion-loss gradients are scaled by w_diff, reconstruction
/// gradients by w_recon.
ExampleLoss accumulate_example(PhysDiffModel &model, Sample const &sample, NoiseDraw const &draw,
                               ObjectiveOptions const &opts, double w_diff, double w_recon);

/// Forward pass only.
ExampleLoss evaluate_example(PhysDiffModel const &model, Sample const &sample, NoiseDraw const &draw);

struct BatchLoss
{
  double total = 0.0;
  double diff = 0.0;
  double traj = 0.0;
  double wind = 0.0;
  double pres = 0.0;

  double recon() const { return traj + wind + pres; }
};

/// Zeroes all gradients, then accumulates the gradient of the uncertainty
/// weighted loss of the batch mean, including the two log-sigma scalars.
BatchLoss batch_gradient(PhysDiffModel &model, std::vector<Sample const *> const &batch,
                         std::vector<NoiseDraw> const &draws, ObjectiveOptions const &opts);

/// The uncertainty weighted batch loss without touching gradients.
BatchLoss batch_loss(PhysDiffModel const &model, std::vector<Sample const *> const &batch,
                     std::vector<NoiseDraw> const &draws);

/// Checks the analytic gradient of the batch loss against central differences
/// on `samples` randomly chosen scalars. Routing and the latent stop-gradient
/// are switched off so the analytic gradient is the true gradient of the loss.
GradCheckResult objective_gradient_check(PhysDiffModel &model, std::vector<Sample const *> const &batch,
                                         std::vector<NoiseDraw> const &draws, std::size_t samples, double eps,
                                         Rng &rng);

} // namespace physdiff
