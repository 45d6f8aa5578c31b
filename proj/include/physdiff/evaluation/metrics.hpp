#pragma once

#include "physdiff/data/track.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace physdiff {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr int kHoursPerStep = 6;

/// Great-circle distance in km. Latitudes must lie in [-90, 90] and
/// longitudes in [-180, 360]; anything else raises ValidationError.
double haversine(double lat1, double lon1, double lat2, double lon2);

/// One forecast (or truth) value at one lead of one window. member is -1 for
/// deterministic forecasts and ensemble means.
struct ForecastRecord
{
  std::string track_id;
  std::int64_t origin_time = 0;
  int lead = 1; // steps after the origin
  int member = -1;
  double lat = 0.0, lon = 0.0, wind = 0.0, pressure = 0.0;
};

/// Records for a window's N forecast steps (obs[k] is lead k + 1).
std::vector<ForecastRecord> to_records(std::string const &track_id, std::int64_t origin_time,
                                       std::vector<TCObservation> const &obs, int member = -1);

struct LeadMetrics
{
  int lead = 0;
  double traj_km = 0.0;
  double pres_hpa = 0.0;
  double wind_ms = 0.0;
  std::size_t count = 0;
};

struct MetricsTable
{
  std::string tag;
  std::vector<LeadMetrics> rows; // ascending lead

  LeadMetrics const &at_lead(int lead) const;
  nlohmann::json to_json() const;
  static MetricsTable from_json(nlohmann::json const &j);
  /// Aligned human-readable table.
  std::string to_text() const;
};

/// Mean absolute errors per lead. Forecasts and truths are matched on
/// (track_id, origin_time, lead); any unmatched or duplicated key raises
/// ValidationError listing the keys. Sums run in key order, so the result does
/// not depend on input order.
MetricsTable evaluate(std::vector<ForecastRecord> const &forecasts, std::vector<ForecastRecord> const &truths,
                      std::string tag = {});

/// Header `track_id,origin_time,lead_h,lat,lon,wind_ms,pressure_hpa,member`.
void write_forecast_csv(std::ostream &out, std::vector<ForecastRecord> const &records);
std::vector<ForecastRecord> parse_forecast_csv(std::string const &text);

} // namespace physdiff
