#include "physdiff/diffusion/schedule.hpp"

namespace physdiff {

NoiseSchedule build_schedule(int steps, double beta_start, double beta_end)
{
  if (steps < 1) { throw ConfigError("schedule: T must be >= 1"); }
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    double const f = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[static_cast<std::size_t>(i)] = beta_start + f * (beta_end - beta_start);
  }
  return schedule_from_betas(std::move(betas));
}

NoiseSchedule schedule_from_betas(std::vector<double> betas)
{
  if (betas.empty()) { throw ConfigError("schedule: T must be >= 1"); }
  NoiseSchedule s;
  double prod = 1.0;
  for (double b : betas) {
    if (!(b >= 0.0) || !(b < 1.0)) { throw ConfigError("schedule: beta outside [0, 1)"); }
    prod *= 1.0 - b;
    s.alphas.push_back(1.0 - b);
    s.alpha_bars.push_back(prod);
    s.sigmas.push_back(std::sqrt(b));
  }
  s.betas = std::move(betas);
  return s;
}

} // namespace physdiff
