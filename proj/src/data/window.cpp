#include "physdiff/data/window.hpp"

#include <algorithm>
#include <cmath>

namespace physdiff {

std::vector<TrackWindow> make_windows(Track const &track, int history, int horizon, Index channels, Index height,
                                      Index width)
{
  if (history < 1 || horizon < 1) { throw ConfigError("make_windows: need M >= 1 and N >= 1"); }
  auto const len = static_cast<int>(track.obs.size());
  int const count = std::max(0, len - history - horizon + 1);
  bool const has_env = !track.env_hist.empty();
  if (has_env && (track.env_hist.size() != track.obs.size() || track.env_fut.size() != track.obs.size())) {
    throw DimensionError("make_windows: track '" + track.id + "' has mismatched environment field counts");
  }
  auto zero_field = [&](std::int64_t time, FieldKind kind) {
    return make_env_field(Tensor::Zero(channels, height * width), height, width, time, kind);
  };

  std::vector<TrackWindow> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    TrackWindow w;
    w.track_id = track.id;
    w.year = track.year;
    for (int i = 0; i < history; ++i) {
      auto const idx = static_cast<std::size_t>(k + i);
      w.history.push_back(track.obs[idx]);
      w.env_hist.push_back(has_env ? track.env_hist[idx] : zero_field(track.obs[idx].time, FieldKind::historical));
    }
    for (int i = 0; i < horizon; ++i) {
      auto const idx = static_cast<std::size_t>(k + history + i);
      w.future.push_back(track.obs[idx]);
      w.env_fut.push_back(has_env ? track.env_fut[idx] : zero_field(track.obs[idx].time, FieldKind::future));
    }
    out.push_back(std::move(w));
  }
  return out;
}

void NormStats::validate() const
{
  auto ok = [](double s) { return std::isfinite(s) && s > 0.0; };
  if (!ok(wind_std) || !ok(pres_std) || !ok(coord_std)) {
    throw ValidationError("norm stats: non-positive attribute scale");
  }
  if (env_mean.size() != env_std.size()) { throw ValidationError("norm stats: env mean/std size mismatch"); }
  for (double s : env_std) {
    if (!ok(s)) { throw ValidationError("norm stats: non-positive environment channel scale"); }
  }
}

namespace {

struct Moments
{
  double sum = 0.0, sq = 0.0;
  double n = 0.0;
  void add(double v)
  {
    sum += v;
    sq += v * v;
    n += 1.0;
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  double stddev() const
  {
    if (n < 1) { return 0.0; }
    double const m = mean();
    return std::sqrt(std::max(0.0, sq / n - m * m));
  }
};

} // namespace

NormStats compute_norm_stats(std::vector<Track> const &train)
{
  Moments wind, pres, coord;
  std::vector<Moments> env;
  for (auto const &t : train) {
    for (std::size_t i = 0; i < t.obs.size(); ++i) {
      wind.add(t.obs[i].wind);
      pres.add(t.obs[i].pressure);
      if (i > 0) {
        coord.add(t.obs[i].lat - t.obs[i - 1].lat);
        coord.add(wrap_lon(t.obs[i].lon - t.obs[i - 1].lon));
      }
    }
    for (auto const *fields : {&t.env_hist, &t.env_fut}) {
      for (auto const &f : *fields) {
        if (env.empty()) { env.resize(static_cast<std::size_t>(f.channels)); }
        for (Index c = 0; c < f.channels; ++c) {
          auto &m = env[static_cast<std::size_t>(c)];
          auto const row = f.grid->row(c);
          m.sum += row.sum();
          m.sq += row.squaredNorm();
          m.n += static_cast<double>(row.size());
        }
      }
    }
  }
  NormStats s;
  s.wind_mean = wind.mean();
  s.wind_std = wind.stddev();
  s.pres_mean = pres.mean();
  s.pres_std = pres.stddev();
  s.coord_std = coord.stddev();
  for (auto const &m : env) {
    s.env_mean.push_back(m.mean());
    s.env_std.push_back(m.stddev());
  }
  s.validate();
  return s;
}

namespace {

Tensor normalize_obs(std::vector<TCObservation> const &obs, double ref_lat, double ref_lon, NormStats const &s)
{
  Tensor x(static_cast<Index>(obs.size()), kNumAttrs);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    auto const r = static_cast<Index>(i);
    x(r, kLat) = (obs[i].lat - ref_lat) / s.coord_std;
    x(r, kLon) = wrap_lon(obs[i].lon - ref_lon) / s.coord_std;
    x(r, kWind) = (obs[i].wind - s.wind_mean) / s.wind_std;
    x(r, kPres) = (obs[i].pressure - s.pres_mean) / s.pres_std;
  }
  return x;
}

Tensor normalize_grid(Tensor const &g, NormStats const &s)
{
  if (static_cast<std::size_t>(g.rows()) != s.env_mean.size()) {
    // data without environment statistics: leave as is
    if (s.env_mean.empty()) { return g; }
    throw DimensionError("normalize: env channels " + std::to_string(g.rows()) + " vs stats " +
                         std::to_string(s.env_mean.size()));
  }
  Tensor out = g;
  for (Index c = 0; c < g.rows(); ++c) {
    auto const cu = static_cast<std::size_t>(c);
    out.row(c) = (g.row(c).array() - s.env_mean[cu]) / s.env_std[cu];
  }
  return out;
}

Tensor denormalize_grid(Tensor const &g, NormStats const &s)
{
  if (s.env_mean.empty()) { return g; }
  Tensor out = g;
  for (Index c = 0; c < g.rows(); ++c) {
    auto const cu = static_cast<std::size_t>(c);
    out.row(c) = g.row(c).array() * s.env_std[cu] + s.env_mean[cu];
  }
  return out;
}

} // namespace

Sample normalize(TrackWindow const &w, NormStats const &stats)
{
  stats.validate();
  if (w.history.empty()) { throw ContractError("normalize: empty history"); }
  Sample s;
  s.ref_lat = w.history.back().lat;
  s.ref_lon = w.history.back().lon;
  s.origin_time = w.history.back().time;
  s.track_id = w.track_id;
  s.year = w.year;
  s.history = normalize_obs(w.history, s.ref_lat, s.ref_lon, stats);
  s.target = normalize_obs(w.future, s.ref_lat, s.ref_lon, stats);
  for (auto const *fields : {&w.env_hist, &w.env_fut}) {
    for (auto const &f : *fields) {
      s.env.push_back(normalize_grid(*f.grid, stats));
      s.kinds.push_back(f.kind);
      s.height = f.height;
      s.width = f.width;
    }
  }
  return s;
}

std::vector<Sample> make_samples(std::vector<Track> const &tracks, int history, int horizon, NormStats const &stats,
                                 Index channels, Index height, Index width)
{
  std::vector<Sample> out;
  for (auto const &t : tracks) {
    for (auto const &w : make_windows(t, history, horizon, channels, height, width)) {
      out.push_back(normalize(w, stats));
    }
  }
  return out;
}

std::vector<TCObservation> denormalize_forecast(Tensor const &x, double ref_lat, double ref_lon,
                                                std::int64_t origin_time, NormStats const &s)
{
  std::vector<TCObservation> out;
  for (Index i = 0; i < x.rows(); ++i) {
    TCObservation o;
    o.lat = std::clamp(ref_lat + x(i, kLat) * s.coord_std, -90.0, 90.0);
    o.lon = wrap_lon(ref_lon + x(i, kLon) * s.coord_std);
    o.wind = x(i, kWind) * s.wind_std + s.wind_mean;
    o.pressure = x(i, kPres) * s.pres_std + s.pres_mean;
    o.time = origin_time + 1 + i;
    out.push_back(o);
  }
  return out;
}

TrackWindow denormalize(Sample const &s, NormStats const &stats)
{
  TrackWindow w;
  w.track_id = s.track_id;
  w.year = s.year;
  auto const m = s.history.rows();
  w.history = denormalize_forecast(s.history, s.ref_lat, s.ref_lon, s.origin_time - m, stats);
  w.future = denormalize_forecast(s.target, s.ref_lat, s.ref_lon, s.origin_time, stats);
  for (std::size_t i = 0; i < s.env.size(); ++i) {
    bool const hist = static_cast<Index>(i) < m;
    std::int64_t const time = hist ? s.origin_time - m + 1 + static_cast<std::int64_t>(i)
                                   : s.origin_time + 1 + static_cast<std::int64_t>(i) - m;
    auto f = make_env_field(denormalize_grid(s.env[i], stats), s.height, s.width, time, s.kinds[i]);
    (hist ? w.env_hist : w.env_fut).push_back(std::move(f));
  }
  return w;
}

Split chronological_split(std::vector<Track> tracks, double train_frac, double val_frac)
{
  if (!(train_frac > 0 && train_frac < 1) || !(val_frac > 0 && val_frac < 1) || train_frac + val_frac >= 1) {
    throw ConfigError("chronological_split: fractions must lie in (0, 1) with sum < 1");
  }
  std::stable_sort(tracks.begin(), tracks.end(), [](Track const &a, Track const &b) { return a.year < b.year; });
  auto const n = tracks.size();
  auto boundary = [&](double frac) {
    auto b = static_cast<std::size_t>(std::floor(static_cast<double>(n) * frac + 1e-9));
    b = std::min(b, n);
    // never split a year
    while (b > 0 && b < n && tracks[b].year == tracks[b - 1].year) { ++b; }
    return b;
  };
  auto const b1 = boundary(train_frac);
  auto const b2 = std::max(b1, boundary(train_frac + val_frac));
  if (b1 == 0 || b2 == b1 || b2 == n) {
    throw ConfigError("chronological_split: a split would be empty (" + std::to_string(n) + " tracks)");
  }
  Split s;
  s.train.assign(std::make_move_iterator(tracks.begin()), std::make_move_iterator(tracks.begin() + b1));
  s.val.assign(std::make_move_iterator(tracks.begin() + b1), std::make_move_iterator(tracks.begin() + b2));
  s.test.assign(std::make_move_iterator(tracks.begin() + b2), std::make_move_iterator(tracks.end()));
  return s;
}

} // namespace physdiff
