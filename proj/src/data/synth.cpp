#include "physdiff/data/synth.hpp"

#include "physdiff/core/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace physdiff {

void SynthConfig::validate() const
{
  auto fail = [](std::string const &m) { throw ConfigError("synth config: " + m); };
  if (n_tracks < 1) { fail("n_tracks must be >= 1"); }
  if (min_len < 2 || max_len < min_len) { fail("need 2 <= min_len <= max_len"); }
  if (channels < 1 || grid < 4) { fail("need channels >= 1 and grid >= 4"); }
  if (heading_noise_deg < 0 || obs_noise_deg < 0 || pressure_noise < 0 || wind_noise < 0 || env_noise < 0 ||
      fut_env_noise < 0 || fut_motion_error < 0) {
    fail("noise levels must be >= 0");
  }
  if (wp_a <= 0 || wp_b <= 0 || p_env <= 950 || p_env >= 1100) { fail("invalid wind-pressure relation"); }
  if (px_per_deg <= 0 || blob_sigma <= 0) { fail("blob parameters must be > 0"); }
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Motion
{
  double north = 0.0; // degrees latitude per step
  double east = 0.0;  // degrees of arc per step
  double dp = 0.0;    // hPa per step
};

Tensor render_field(SynthConfig const &cfg, Motion const &m, double noise, Rng &rng)
{
  Index const h = cfg.grid, w = cfg.grid;
  Tensor g(cfg.channels, h * w);
  double const amp = 1.0 - 0.05 * m.dp;
  double const s2 = 2.0 * cfg.blob_sigma * cfg.blob_sigma;
  for (Index c = 0; c < cfg.channels; ++c) {
    double const gain = static_cast<double>(c + 1) * cfg.px_per_deg;
    double const cy = 0.5 * static_cast<double>(h - 1) + gain * m.north;
    double const cx = 0.5 * static_cast<double>(w - 1) + gain * m.east;
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        double const dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        double const v = amp * std::exp(-(dy * dy + dx * dx) / s2) + noise * rng.normal();
        // float32 precision so in-memory data equals what the env blobs store
        g(c, y * w + x) = static_cast<double>(static_cast<float>(v));
      }
    }
  }
  return g;
}

} // namespace

std::vector<Track> synth_dataset(SynthConfig const &cfg, std::uint64_t seed)
{
  cfg.validate();
  Rng const root(seed);
  std::vector<Track> tracks;
  tracks.reserve(static_cast<std::size_t>(cfg.n_tracks));
  std::int64_t clock = 0;

  for (int i = 0; i < cfg.n_tracks; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i));
    auto const len = static_cast<int>(rng.uniform_int(cfg.min_len, cfg.max_len));

    // kinematics: heading measured counter-clockwise from east
    double lat = rng.uniform(8.0, 22.0);
    double lon = rng.uniform(120.0, 175.0);
    double heading = rng.uniform(140.0, 175.0);
    double const turn = rng.uniform(-12.0, -2.0);
    double const speed0 = rng.uniform(0.25, 0.55);
    double const accel = rng.uniform(0.0, 0.02);

    // intensity lifecycle
    double const depth = rng.uniform(25.0, 85.0);
    double const peak = rng.uniform(0.35, 0.65);

    std::vector<double> lats, lons, press;
    for (int k = 0; k < len; ++k) {
      lats.push_back(lat);
      lons.push_back(lon);
      double const tau = static_cast<double>(k) / static_cast<double>(len - 1);
      double const life = tau < peak ? std::sin(0.5 * std::numbers::pi * tau / peak)
                                     : std::cos(0.5 * std::numbers::pi * (tau - peak) / (1.0 - peak));
      press.push_back(1008.0 - depth * life);

      double const speed = speed0 + accel * k;
      lat = std::clamp(lat + speed * std::sin(heading * kDeg), -85.0, 85.0);
      lon = wrap_lon(lon + speed * std::cos(heading * kDeg) / std::cos(lat * kDeg));
      heading += turn + cfg.heading_noise_deg * rng.normal();
    }

    Track t;
    t.id = "SYN" + std::to_string(i);
    t.year = i;
    for (int k = 0; k < len; ++k) {
      TCObservation o;
      o.lat = std::clamp(lats[k] + cfg.obs_noise_deg * rng.normal(), -90.0, 90.0);
      o.lon = wrap_lon(lons[k] + cfg.obs_noise_deg * rng.normal());
      o.pressure = press[k] + cfg.pressure_noise * rng.normal();
      double const deficit = std::max(0.0, cfg.p_env - o.pressure);
      o.wind = std::max(0.0, cfg.wp_a * std::pow(deficit, cfg.wp_b) + cfg.wind_noise * rng.normal());
      o.time = clock + k;
      t.obs.push_back(o);
    }

    for (int k = 0; k < len; ++k) {
      int const a = std::min(k, len - 2), b = a + 1;
      Motion m;
      m.north = lats[b] - lats[a];
      m.east = wrap_lon(lons[b] - lons[a]) * std::cos(lats[a] * kDeg);
      m.dp = press[b] - press[a];
      t.env_hist.push_back(make_env_field(render_field(cfg, m, cfg.env_noise, rng), cfg.grid, cfg.grid, clock + k,
                                          FieldKind::historical));
      Motion f = m;
      f.north += cfg.fut_motion_error * rng.normal();
      f.east += cfg.fut_motion_error * rng.normal();
      t.env_fut.push_back(make_env_field(render_field(cfg, f, cfg.fut_env_noise, rng), cfg.grid, cfg.grid, clock + k,
                                         FieldKind::future));
    }
    clock += len + 4;
    tracks.push_back(std::move(t));
  }
  return tracks;
}

} // namespace physdiff
