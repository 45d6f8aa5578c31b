#include "physdiff/data/track.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace physdiff {

namespace {

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) { s.remove_prefix(1); }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) { s.remove_suffix(1); }
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto const pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) { break; }
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t row, char const *column)
{
  double v = 0.0;
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("row " + std::to_string(row) + ": cannot parse " + column + " value '" + std::string(s) + "'");
  }
  return v;
}

struct Stamp
{
  std::int64_t step = 0;
  std::int64_t year = 0;
  bool has_year = false;
};

Stamp parse_stamp(std::string_view s, std::size_t row)
{
  Stamp st;
  std::int64_t v = 0;
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) {
    st.step = v;
    return st;
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  std::string const str(s);
  char sep = 0;
  int const n = std::sscanf(str.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h, &mi, &sec);
  if (n < 6 || (sep != 'T' && sep != ' ')) {
    throw ParseError("row " + std::to_string(row) + ": cannot parse timestamp '" + str + "'");
  }
  using namespace std::chrono;
  year_month_day const ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                           std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) { throw ParseError("row " + std::to_string(row) + ": invalid date '" + str + "'"); }
  std::int64_t const days = sys_days{ymd}.time_since_epoch().count();
  std::int64_t const minutes = days * 1440 + h * 60 + mi;
  if (mi != 0 || sec != 0 || h % 6 != 0) {
    throw ValidationError("row " + std::to_string(row) + ": timestamp not on a 6-hour boundary");
  }
  st.step = minutes / 360;
  st.year = y;
  st.has_year = true;
  return st;
}

std::string fmt(double v)
{
  std::array<char, 32> buf{};
  auto const [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

} // namespace

void validate(TCObservation const &o)
{
  if (!std::isfinite(o.lat) || o.lat < -90.0 || o.lat > 90.0) {
    throw ValidationError("latitude " + fmt(o.lat) + " outside [-90, 90]");
  }
  if (!std::isfinite(o.lon) || o.lon < -180.0 || o.lon > 180.0) {
    throw ValidationError("longitude " + fmt(o.lon) + " outside [-180, 180]");
  }
  if (!std::isfinite(o.wind) || o.wind < 0.0) { throw ValidationError("wind " + fmt(o.wind) + " m/s is negative"); }
  if (!std::isfinite(o.pressure) || o.pressure <= 850.0 || o.pressure >= 1100.0) {
    throw ValidationError("pressure " + fmt(o.pressure) + " hPa outside (850, 1100)");
  }
}

EnvField make_env_field(Tensor grid, Index height, Index width, std::int64_t time, FieldKind kind)
{
  if (grid.cols() != height * width) {
    throw DimensionError("env field: grid " + shape_str(grid) + " does not match " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  if (!all_finite(grid)) { throw ValidationError("env field: non-finite entries"); }
  EnvField f;
  f.channels = grid.rows();
  f.height = height;
  f.width = width;
  f.grid = std::make_shared<Tensor const>(std::move(grid));
  f.time = time;
  f.kind = kind;
  return f;
}

double wrap_lon(double lon)
{
  double w = std::fmod(lon + 180.0, 360.0);
  if (w < 0.0) { w += 360.0; }
  return w - 180.0;
}

std::vector<Track> parse_best_track(std::string_view text)
{
  static constexpr std::array<char const *, 6> kColumns = {"track_id", "timestamp", "lat", "lon", "wind_ms",
                                                           "pressure_hpa"};
  std::vector<Track> tracks;
  std::size_t row = 0;
  std::array<std::size_t, 6> col{};
  std::size_t width = 0;
  std::map<std::string, bool, std::less<>> seen;

  std::size_t start = 0;
  while (start <= text.size()) {
    auto const end = text.find('\n', start);
    auto const line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    start = (end == std::string_view::npos) ? text.size() + 1 : end + 1;
    if (line.empty()) { continue; }
    ++row;
    auto const cells = split_csv(line);
    if (row == 1) {
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        std::size_t found = cells.size();
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (cells[i] == kColumns[c]) { found = i; }
        }
        if (found == cells.size()) { throw ParseError(std::string("missing column: ") + kColumns[c]); }
        col[c] = found;
      }
      width = cells.size();
      continue;
    }
    if (cells.size() != width) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(width) + " fields, got " +
                       std::to_string(cells.size()));
    }
    std::string const id(cells[col[0]]);
    Stamp const st = parse_stamp(cells[col[1]], row);
    TCObservation o;
    o.lat = parse_double(cells[col[2]], row, "lat");
    o.lon = parse_double(cells[col[3]], row, "lon");
    o.wind = parse_double(cells[col[4]], row, "wind_ms");
    o.pressure = parse_double(cells[col[5]], row, "pressure_hpa");
    o.time = st.step;
    try {
      validate(o);
    } catch (ValidationError const &e) {
      throw ValidationError("row " + std::to_string(row) + ": " + e.what());
    }

    if (tracks.empty() || tracks.back().id != id) {
      if (seen.count(id)) {
        throw ParseError("row " + std::to_string(row) + ": track '" + id + "' is not contiguous (rows must be sorted)");
      }
      seen[id] = true;
      Track t;
      t.id = id;
      t.year = st.has_year ? st.year : static_cast<std::int64_t>(tracks.size());
      tracks.push_back(std::move(t));
    } else if (tracks.back().obs.back().time >= o.time) {
      throw ValidationError("row " + std::to_string(row) + ": times not strictly increasing in track '" + id + "'");
    }
    tracks.back().obs.push_back(o);
  }
  if (row == 0) { throw ParseError("missing column: track_id (empty input)"); }
  return tracks;
}

std::string write_best_track(std::vector<Track> const &tracks)
{
  std::ostringstream os;
  os << "track_id,timestamp,lat,lon,wind_ms,pressure_hpa\n";
  for (auto const &t : tracks) {
    for (auto const &o : t.obs) {
      os << t.id << ',' << o.time << ',' << fmt(o.lat) << ',' << fmt(o.lon) << ',' << fmt(o.wind) << ','
         << fmt(o.pressure) << '\n';
    }
  }
  return os.str();
}

} // namespace physdiff
