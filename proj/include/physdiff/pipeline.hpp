#pragma once

#include "physdiff/config.hpp"
#include "physdiff/data/dataset.hpp"
#include "physdiff/data/window.hpp"

#include <filesystem>
#include <vector>

namespace physdiff {

/// Windowed, normalized splits of one dataset.
struct PreparedData
{
  Split split;
  NormStats stats; // from the training tracks
  std::vector<Sample> train, val, test;
};

/// Synthetic tracks for cfg.synth under cfg.seed.
std::vector<Track> synthesize(RunConfig const &cfg);

/// Splits chronologically and windows every split with the model's history
/// and horizon. Statistics come from the training tracks unless `stats` is
/// given (a trained model must see the normalization it was trained with).
PreparedData prepare(RunConfig const &cfg, std::vector<Track> tracks, NormStats const *stats = nullptr);

/// Loads cfg.data_dir when it is set, otherwise synthesizes tracks in memory.
PreparedData prepare(RunConfig const &cfg, NormStats const *stats = nullptr);

} // namespace physdiff
