#pragma once

#include "physdiff/evaluation/forecast.hpp"
#include "physdiff/training/trainer.hpp"

namespace physdiff {

struct AblationSetup
{
  ModelConfig model;        // ablation field is overridden per variant
  TrainConfig train;        // identical batches and noise for every variant
  std::uint64_t model_seed = 0;
  std::size_t members = 1;
  std::uint64_t root_seed = 0;
};

struct AblationOutcome
{
  Ablation variant = Ablation::none;
  MetricsTable metrics;
};

/// Trains and evaluates each variant on the same data. Model weights are
/// initialized from the same seed, so shared parameters start equal.
std::vector<AblationOutcome> run_ablation(AblationSetup const &setup, std::vector<Ablation> const &variants,
                                          std::vector<Sample> const &train_set, std::vector<Sample> const &val_set,
                                          std::vector<Sample> const &test_set, NormStats const &stats);

} // namespace physdiff
