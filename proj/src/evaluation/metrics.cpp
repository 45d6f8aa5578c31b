#include "physdiff/evaluation/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <tuple>

namespace physdiff {

double haversine(double lat1, double lon1, double lat2, double lon2)
{
  auto check = [](double lat, double lon) {
    if (!(lat >= -90.0 && lat <= 90.0)) { throw ValidationError("haversine: latitude " + std::to_string(lat) + " outside [-90, 90]"); }
    if (!(lon >= -180.0 && lon <= 360.0)) {
      throw ValidationError("haversine: longitude " + std::to_string(lon) + " outside [-180, 360]");
    }
  };
  check(lat1, lon1);
  check(lat2, lon2);
  constexpr double rad = std::numbers::pi / 180.0;
  double const sdlat = std::sin(0.5 * (lat2 - lat1) * rad);
  double const sdlon = std::sin(0.5 * (lon2 - lon1) * rad);
  double const h = sdlat * sdlat + std::cos(lat1 * rad) * std::cos(lat2 * rad) * sdlon * sdlon;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
}

std::vector<ForecastRecord> to_records(std::string const &track_id, std::int64_t origin_time,
                                       std::vector<TCObservation> const &obs, int member)
{
  std::vector<ForecastRecord> out;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    out.push_back({track_id, origin_time, static_cast<int>(k) + 1, member, obs[k].lat, obs[k].lon, obs[k].wind,
                   obs[k].pressure});
  }
  return out;
}

LeadMetrics const &MetricsTable::at_lead(int lead) const
{
  for (auto const &r : rows) {
    if (r.lead == lead) { return r; }
  }
  throw ValidationError("metrics table has no lead " + std::to_string(lead));
}

nlohmann::json MetricsTable::to_json() const
{
  nlohmann::json leads = nlohmann::json::array();
  for (auto const &r : rows) {
    leads.push_back({{"lead", r.lead},
                     {"lead_h", r.lead * kHoursPerStep},
                     {"traj_km", r.traj_km},
                     {"pres_hpa", r.pres_hpa},
                     {"wind_ms", r.wind_ms},
                     {"count", r.count}});
  }
  return {{"tag", tag}, {"leads", leads}};
}

MetricsTable MetricsTable::from_json(nlohmann::json const &j)
{
  MetricsTable t;
  t.tag = j.at("tag").get<std::string>();
  for (auto const &r : j.at("leads")) {
    t.rows.push_back({r.at("lead").get<int>(), r.at("traj_km").get<double>(), r.at("pres_hpa").get<double>(),
                      r.at("wind_ms").get<double>(), r.at("count").get<std::size_t>()});
  }
  return t;
}

std::string MetricsTable::to_text() const
{
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-12s %6s %12s %12s %12s %8s\n", "model", "lead_h", "traj_km", "pres_hpa",
                "wind_ms", "count");
  os << line;
  for (auto const &r : rows) {
    std::snprintf(line, sizeof line, "%-12s %6d %12.3f %12.3f %12.3f %8zu\n", tag.c_str(), r.lead * kHoursPerStep,
                  r.traj_km, r.pres_hpa, r.wind_ms, r.count);
    os << line;
  }
  return os.str();
}

namespace {
using Key = std::tuple<int, std::string, std::int64_t>; // lead first so sums group by lead

std::string key_str(Key const &k)
{
  return std::get<1>(k) + "@" + std::to_string(std::get<2>(k)) + "+" + std::to_string(std::get<0>(k));
}

std::map<Key, ForecastRecord const *> index_records(std::vector<ForecastRecord> const &recs, char const *what)
{
  std::map<Key, ForecastRecord const *> m;
  for (auto const &r : recs) {
    Key k{r.lead, r.track_id, r.origin_time};
    if (!m.emplace(k, &r).second) { throw ValidationError(std::string("duplicate ") + what + " key " + key_str(k)); }
  }
  return m;
}
} // namespace

MetricsTable evaluate(std::vector<ForecastRecord> const &forecasts, std::vector<ForecastRecord> const &truths,
                      std::string tag)
{
  auto const f = index_records(forecasts, "forecast");
  auto const t = index_records(truths, "truth");
  std::vector<std::string> unmatched;
  for (auto const &[k, _] : f) {
    if (!t.contains(k)) { unmatched.push_back("forecast " + key_str(k)); }
  }
  for (auto const &[k, _] : t) {
    if (!f.contains(k)) { unmatched.push_back("truth " + key_str(k)); }
  }
  if (!unmatched.empty()) {
    std::string msg = "evaluate: " + std::to_string(unmatched.size()) + " unmatched keys:";
    for (std::size_t i = 0; i < unmatched.size() && i < 20; ++i) {
      msg += " " + unmatched[i];
    }
    if (unmatched.size() > 20) { msg += " ..."; }
    throw ValidationError(msg);
  }

  MetricsTable table;
  table.tag = std::move(tag);
  for (auto const &[k, fr] : f) {
    ForecastRecord const &tr = *t.at(k);
    int const lead = std::get<0>(k);
    if (table.rows.empty() || table.rows.back().lead != lead) { table.rows.push_back({lead, 0, 0, 0, 0}); }
    LeadMetrics &row = table.rows.back();
    row.traj_km += haversine(fr->lat, fr->lon, tr.lat, tr.lon);
    row.pres_hpa += std::abs(fr->pressure - tr.pressure);
    row.wind_ms += std::abs(fr->wind - tr.wind);
    ++row.count;
  }
  for (auto &r : table.rows) {
    double const n = static_cast<double>(r.count);
    r.traj_km /= n;
    r.pres_hpa /= n;
    r.wind_ms /= n;
  }
  return table;
}

namespace {
std::string fmt(double v)
{
  char buf[32];
  auto const res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
} // namespace

void write_forecast_csv(std::ostream &out, std::vector<ForecastRecord> const &records)
{
  out << "track_id,origin_time,lead_h,lat,lon,wind_ms,pressure_hpa,member\n";
  for (auto const &r : records) {
    out << r.track_id << ',' << r.origin_time << ',' << r.lead * kHoursPerStep << ',' << fmt(r.lat) << ','
        << fmt(r.lon) << ',' << fmt(r.wind) << ',' << fmt(r.pressure) << ',' << r.member << '\n';
  }
}

std::vector<ForecastRecord> parse_forecast_csv(std::string const &text)
{
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("track_id,origin_time,lead_h,", 0) != 0) {
    throw ParseError("forecast csv: missing header");
  }
  std::vector<ForecastRecord> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) { continue; }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() != 8) { throw ParseError("forecast csv row " + std::to_string(row) + ": expected 8 fields"); }
    try {
      ForecastRecord r;
      r.track_id = cells[0];
      r.origin_time = std::stoll(cells[1]);
      int const lead_h = std::stoi(cells[2]);
      if (lead_h % kHoursPerStep != 0 || lead_h <= 0) { throw std::invalid_argument("lead_h"); }
      r.lead = lead_h / kHoursPerStep;
      r.lat = std::stod(cells[3]);
      r.lon = std::stod(cells[4]);
      r.wind = std::stod(cells[5]);
      r.pressure = std::stod(cells[6]);
      r.member = std::stoi(cells[7]);
      out.push_back(std::move(r));
    } catch (std::logic_error const &) {
      throw ParseError("forecast csv row " + std::to_string(row) + ": malformed value");
    }
  }
  return out;
}

} // namespace physdiff
