#include "physdiff/evaluation/forecast.hpp"

#include "physdiff/core/parallel.hpp"

#include <map>

namespace physdiff {

EnsembleForecast ensemble_forecast(PhysDiffModel const &model, Sample const &sample, NormStats const &stats,
                                   std::size_t members, std::uint64_t root_seed, SampleOptions const &opts)
{
  if (members < 1) { throw ConfigError("ensemble needs at least one member"); }
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < members; ++i) {
    rngs.push_back(member_rng(root_seed, i));
  }
  EnsembleForecast f;
  f.members_norm = sample_members(model, sample, std::move(rngs), opts);
  f.mean_norm = Tensor::Zero(f.members_norm.front().rows(), f.members_norm.front().cols());
  for (auto const &m : f.members_norm) {
    f.mean_norm += m;
    f.members.push_back(denormalize_forecast(m, sample.ref_lat, sample.ref_lon, sample.origin_time, stats));
  }
  f.mean_norm /= static_cast<double>(members);
  f.mean = denormalize_forecast(f.mean_norm, sample.ref_lat, sample.ref_lon, sample.origin_time, stats);
  return f;
}

Tensor persistence_baseline(Sample const &sample, int horizon)
{
  if (sample.history.rows() == 0) { throw ContractError("persistence baseline needs a non-empty history"); }
  if (horizon < 1) { throw ConfigError("persistence baseline: horizon must be >= 1"); }
  return sample.history.bottomRows(1).replicate(horizon, 1);
}

std::vector<ForecastRecord> truth_records(Sample const &sample, NormStats const &stats)
{
  return to_records(sample.track_id, sample.origin_time,
                    denormalize_forecast(sample.target, sample.ref_lat, sample.ref_lon, sample.origin_time, stats));
}

ForecastRun forecast_all(PhysDiffModel const &model, std::vector<Sample> const &samples, NormStats const &stats,
                         std::size_t members, std::uint64_t root_seed)
{
  std::vector<EnsembleForecast> per(samples.size());
  parallel_for(samples.size(),
               [&](std::size_t i) { per[i] = ensemble_forecast(model, samples[i], stats, members, root_seed); });
  ForecastRun run;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto const &s = samples[i];
    auto const mean = to_records(s.track_id, s.origin_time, per[i].mean);
    run.mean.insert(run.mean.end(), mean.begin(), mean.end());
    for (std::size_t m = 0; m < per[i].members.size(); ++m) {
      auto const r = to_records(s.track_id, s.origin_time, per[i].members[m], static_cast<int>(m));
      run.members.insert(run.members.end(), r.begin(), r.end());
    }
  }
  return run;
}

std::vector<ForecastRecord> persistence_all(std::vector<Sample> const &samples, NormStats const &stats)
{
  std::vector<ForecastRecord> out;
  for (auto const &s : samples) {
    Tensor const p = persistence_baseline(s, static_cast<int>(s.target.rows()));
    auto const r = to_records(s.track_id, s.origin_time,
                              denormalize_forecast(p, s.ref_lat, s.ref_lon, s.origin_time, stats));
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

std::vector<ForecastRecord> truths_all(std::vector<Sample> const &samples, NormStats const &stats)
{
  std::vector<ForecastRecord> out;
  for (auto const &s : samples) {
    auto const r = truth_records(s, stats);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

MetricsTable single_member_metrics(std::vector<ForecastRecord> const &members, std::vector<ForecastRecord> const &truths,
                                   std::string tag)
{
  std::map<int, std::vector<ForecastRecord>> by_member;
  for (auto const &r : members) {
    by_member[r.member].push_back(r);
  }
  if (by_member.empty()) { throw ValidationError("no member forecasts to evaluate"); }
  MetricsTable acc;
  for (auto const &[m, recs] : by_member) {
    MetricsTable const t = evaluate(recs, truths);
    if (acc.rows.empty()) {
      acc = t;
      continue;
    }
    for (std::size_t i = 0; i < acc.rows.size(); ++i) {
      acc.rows[i].traj_km += t.rows[i].traj_km;
      acc.rows[i].pres_hpa += t.rows[i].pres_hpa;
      acc.rows[i].wind_ms += t.rows[i].wind_ms;
    }
  }
  double const n = static_cast<double>(by_member.size());
  for (auto &r : acc.rows) {
    r.traj_km /= n;
    r.pres_hpa /= n;
    r.wind_ms /= n;
  }
  acc.tag = std::move(tag);
  return acc;
}

} // namespace physdiff
