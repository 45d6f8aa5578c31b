#pragma once

#include "physdiff/evaluation/metrics.hpp"
#include "physdiff/sampler.hpp"

namespace physdiff {

struct EnsembleForecast
{
  Tensor mean_norm;                 // N x 4, mean of the members in normalized space
  std::vector<Tensor> members_norm; // N x 4 each
  std::vector<TCObservation> mean;
  std::vector<std::vector<TCObservation>> members;
};

/// Member i is sampled from member_rng(root_seed, i). Coordinates are relative
/// displacements in normalized space, so averaging there never crosses the
/// date line.
EnsembleForecast ensemble_forecast(PhysDiffModel const &model, Sample const &sample, NormStats const &stats,
                                   std::size_t members, std::uint64_t root_seed, SampleOptions const &opts = {});

/// Every lead repeats the last history observation (normalized N x 4).
Tensor persistence_baseline(Sample const &sample, int horizon);

/// Physical truth records of a window's future.
std::vector<ForecastRecord> truth_records(Sample const &sample, NormStats const &stats);

struct ForecastRun
{
  std::vector<ForecastRecord> mean;    // ensemble mean per window
  std::vector<ForecastRecord> members; // every member, member index set
};

/// Ensemble forecasts for every sample; windows run in parallel.
ForecastRun forecast_all(PhysDiffModel const &model, std::vector<Sample> const &samples, NormStats const &stats,
                         std::size_t members, std::uint64_t root_seed);

std::vector<ForecastRecord> persistence_all(std::vector<Sample> const &samples, NormStats const &stats);
std::vector<ForecastRecord> truths_all(std::vector<Sample> const &samples, NormStats const &stats);

/// Mean of the per-member metric tables (each member evaluated on its own).
MetricsTable single_member_metrics(std::vector<ForecastRecord> const &members, std::vector<ForecastRecord> const &truths,
                                   std::string tag);

} // namespace physdiff
