#include "physdiff/pipeline.hpp"

namespace physdiff {

std::vector<Track> synthesize(RunConfig const &cfg) { return synth_dataset(cfg.synth, cfg.seed); }

PreparedData prepare(RunConfig const &cfg, std::vector<Track> tracks, NormStats const *stats)
{
  cfg.validate();
  PreparedData d;
  d.split = chronological_split(std::move(tracks), cfg.train_frac, cfg.val_frac);
  d.stats = stats != nullptr ? *stats : compute_norm_stats(d.split.train);
  auto const &m = cfg.model;
  auto windows = [&](std::vector<Track> const &ts) {
    return make_samples(ts, m.history, m.horizon, d.stats, m.channels, m.height, m.width);
  };
  d.train = windows(d.split.train);
  d.val = windows(d.split.val);
  d.test = windows(d.split.test);
  if (d.train.empty()) { throw ConfigError("no training windows: tracks are shorter than history + horizon"); }
  return d;
}

PreparedData prepare(RunConfig const &cfg, NormStats const *stats)
{
  return prepare(cfg, cfg.data_dir.empty() ? synthesize(cfg) : load_dataset(cfg.data_dir), stats);
}

} // namespace physdiff
