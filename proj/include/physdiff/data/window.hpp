#pragma once

#include "track.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace physdiff {

/// Attribute order inside every 4-vector: lat_rel, lon_rel, wind_norm, pressure_norm.
enum Attr : Index
{
  kLat = 0,
  kLon = 1,
  kWind = 2,
  kPres = 3,
  kNumAttrs = 4
};

/// A (history, future) sample: M observed steps ending at the forecast origin
/// and the N steps that follow, with their environment fields.
struct TrackWindow
{
  std::string track_id;
  std::int64_t year = 0;
  std::vector<TCObservation> history;
  std::vector<TCObservation> future;
  std::vector<EnvField> env_hist; // M fields, kind historical
  std::vector<EnvField> env_fut;  // N fields, kind future
};

/// Sliding windows with stride 1; window k's history starts at obs[k].
/// Tracks without environment fields get zero-filled fields of the given shape.
std::vector<TrackWindow> make_windows(Track const &track, int history, int horizon, Index channels = 0,
                                      Index height = 0, Index width = 0);

struct NormStats
{
  double wind_mean = 0.0, wind_std = 1.0;
  double pres_mean = 0.0, pres_std = 1.0;
  double coord_std = 1.0;
  std::vector<double> env_mean, env_std; // per channel

  /// Throws ValidationError if any scale is not strictly positive and finite.
  void validate() const;
};

/// Computed from training tracks only. coord_std is the standard deviation of
/// all per-step latitude and (unwrapped) longitude displacements pooled.
NormStats compute_norm_stats(std::vector<Track> const &train);

/// Normalized model input for one window. Coordinates are relative to the
/// last history observation (the forecast origin).
struct Sample
{
  Tensor history;           // M x 4
  Tensor target;            // N x 4
  std::vector<Tensor> env;  // M + N grids, C x (H*W), historical then future
  std::vector<FieldKind> kinds;
  double ref_lat = 0.0, ref_lon = 0.0;
  std::string track_id;
  std::int64_t origin_time = 0;
  std::int64_t year = 0;
  Index height = 0, width = 0;
};

Sample normalize(TrackWindow const &w, NormStats const &stats);

/// Windows of every track, normalized. Tracks shorter than M + N contribute none.
std::vector<Sample> make_samples(std::vector<Track> const &tracks, int history, int horizon, NormStats const &stats,
                                 Index channels = 0, Index height = 0, Index width = 0);

/// Inverse of normalize for the whole window.
TrackWindow denormalize(Sample const &s, NormStats const &stats);

/// Maps an N x 4 normalized forecast back to physical observations around the
/// given origin. Times are origin_time + 1 ... origin_time + N.
std::vector<TCObservation> denormalize_forecast(Tensor const &x, double ref_lat, double ref_lon,
                                                std::int64_t origin_time, NormStats const &stats);

struct Split
{
  std::vector<Track> train, val, test;
};

/// Orders tracks by year and assigns cumulative floor(n * frac) boundaries;
/// a boundary falling inside a year moves to the end of that year so no year
/// is shared between splits. Throws ConfigError if any split would be empty.
Split chronological_split(std::vector<Track> tracks, double train_frac, double val_frac);

} // namespace physdiff
