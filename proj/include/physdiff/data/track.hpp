#pragma once

#include "physdiff/core/types.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace physdiff {

/// One best-track fix. `time` counts 6-hour steps.
struct TCObservation
{
  double lat = 0.0;      // degrees, [-90, 90]
  double lon = 0.0;      // degrees, [-180, 180]
  double wind = 0.0;     // m/s, >= 0
  double pressure = 0.0; // hPa, (850, 1100)
  std::int64_t time = 0;
};

/// Throws ValidationError naming the violated range.
void validate(TCObservation const &obs);

enum class FieldKind
{
  historical,
  future
};

/// Gridded environment around the storm at one time step. The C x H x W grid
/// is stored as a C x (H*W) tensor, shared between copies.
struct EnvField
{
  Index channels = 0, height = 0, width = 0;
  std::shared_ptr<Tensor const> grid;
  std::int64_t time = 0;
  FieldKind kind = FieldKind::historical;
};

EnvField make_env_field(Tensor grid, Index height, Index width, std::int64_t time, FieldKind kind);

/// A storm track with optional per-step environment (one historical and one
/// forecast field per observation, or none).
struct Track
{
  std::string id;
  std::int64_t year = 0; // chronological split key
  std::vector<TCObservation> obs;
  std::vector<EnvField> env_hist;
  std::vector<EnvField> env_fut;
};

/// Parses `track_id,timestamp,lat,lon,wind_ms,pressure_hpa` CSV. Columns may
/// appear in any order; extra columns are ignored. `timestamp` is either an
/// integer 6-hour step index or an ISO date-time `YYYY-MM-DD[T ]HH:MM[:SS][Z]`
/// on a 6-hour boundary. The split key is the year for ISO stamps and the
/// track's order of appearance for integer stamps.
std::vector<Track> parse_best_track(std::string_view text);

std::string write_best_track(std::vector<Track> const &tracks);

/// Wraps a longitude into [-180, 180).
double wrap_lon(double lon);

} // namespace physdiff
