#pragma once

#include "param.hpp"

#include <functional>
#include <string>
#include <vector>

namespace physdiff {

struct GradCheckResult
{
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(1e-8, |a| + |n|).
double relative_error(double analytic, double numeric);

/// Compares the gradients already accumulated in params[i]->grad against
/// central differences of `loss`. Samples `samples` scalars uniformly over all
/// parameters (all of them when samples >= total). `loss` must be deterministic
/// and must not touch the gradients it is checked against.
GradCheckResult gradient_check(std::function<double()> const &loss,
                               std::vector<Param *> const &params,
                               double eps,
                               std::size_t samples,
                               Rng &rng);

} // namespace physdiff
