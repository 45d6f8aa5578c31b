#pragma once

#include "track.hpp"

#include <cstdint>

namespace physdiff {

/// Knobs for the synthetic best-track + environment generator.
struct SynthConfig
{
  int n_tracks = 200;
  int min_len = 12;
  int max_len = 24;
  Index channels = 4;
  Index grid = 16;

  double heading_noise_deg = 15.0; // random walk on heading per step
  double obs_noise_deg = 0.01;    // position observation noise
  double pressure_noise = 0.5;    // hPa
  double wind_noise = 0.5;        // m/s
  double env_noise = 0.05;        // reanalysis field noise
  double fut_env_noise = 0.10;    // forecast field noise
  double fut_motion_error = 0.05; // degrees, forecast steering error

  // wind = a * (p_env - p)^b
  double p_env = 1015.0;
  double wp_a = 3.4;
  double wp_b = 0.65;

  double px_per_deg = 2.0; // blob displacement gain per channel
  double blob_sigma = 1.5; // pixels

  /// Throws ConfigError on invalid ranges.
  void validate() const;
};

/// Deterministic in (cfg, seed): tracks follow recurving arcs with a
/// random-walk heading, a deepening/filling pressure lifecycle, a wind-pressure
/// power law, and per-step environment fields whose per-channel blob
/// displacement encodes the next 6-hour motion.
std::vector<Track> synth_dataset(SynthConfig const &cfg, std::uint64_t seed);

} // namespace physdiff
