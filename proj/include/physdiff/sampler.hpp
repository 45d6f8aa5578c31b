#pragma once

#include "physdiff/model.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace physdiff {

/// epsilon prediction for a batch of latents at step t.
using NoisePredictor = std::function<Tensor(Tensor const &zt, int t)>;

/// Ancestral loop from z_T down to z_0 with w ~ N(0, I) for t > 1 and w = 0 at t = 1.
/// Throws DivergenceError naming the step if the latent becomes non-finite.
Tensor ancestral_sample(NoiseSchedule const &sched, Tensor z, NoisePredictor const &predict, Rng &rng);

/// Mean-pooled post-gating task streams of the last decoder block, one row
/// vector per task (traj, wind, pres).
using TaskFeatures = std::array<Eigen::RowVectorXd, kNumTasks>;

struct SampleOptions
{
  /// Filled with one entry per member from the final (t = 1) step when set.
  std::vector<TaskFeatures> *features = nullptr;
};

/// Draws one normalized N x 4 forecast per rng. Member i uses only rngs[i]:
/// z_T from it first, then one N(0, I) draw per step t > 1. The context and
/// its cross-attention memories are built once per step and shared.
std::vector<Tensor> sample_members(PhysDiffModel const &model, Sample const &sample, std::vector<Rng> rngs,
                                   SampleOptions const &opts = {});

/// Single-member convenience form.
Tensor sample(PhysDiffModel const &model, Sample const &sample, Rng rng);

/// Rng of ensemble member i under a root seed.
Rng member_rng(std::uint64_t root_seed, std::size_t member);

} // namespace physdiff
