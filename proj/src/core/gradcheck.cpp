#include "physdiff/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace physdiff {

double relative_error(double analytic, double numeric)
{
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult gradient_check(std::function<double()> const &loss,
                               std::vector<Param *> const &params,
                               double eps,
                               std::size_t samples,
                               Rng &rng)
{
  std::vector<std::pair<Param *, Index>> picks;
  Index total = 0;
  for (auto *p : params) {
    total += p->value.size();
  }
  if (total == 0) { return {}; }
  if (samples >= static_cast<std::size_t>(total)) {
    for (auto *p : params) {
      for (Index i = 0; i < p->value.size(); ++i) {
        picks.emplace_back(p, i);
      }
    }
  } else {
    for (std::size_t s = 0; s < samples; ++s) {
      Index flat = rng.uniform_int(0, total - 1);
      for (auto *p : params) {
        if (flat < p->value.size()) {
          picks.emplace_back(p, flat);
          break;
        }
        flat -= p->value.size();
      }
    }
  }

  GradCheckResult result;
  for (auto const &[p, i] : picks) {
    double &x = p->value.data()[i];
    double const saved = x;
    x = saved + eps;
    double const up = loss();
    x = saved - eps;
    double const down = loss();
    x = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw DivergenceError("gradient_check: non-finite loss while perturbing " + p->name);
    }
    double const numeric = (up - down) / (2.0 * eps);
    double const analytic = p->grad.data()[i];
    double const err = relative_error(analytic, numeric);
    ++result.checked;
    if (err > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = err;
      result.worst_param = p->name;
      result.worst_index = i;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

} // namespace physdiff
