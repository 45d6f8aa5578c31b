#pragma once

#include "physdiff/core/types.hpp"

#include <cmath>
#include <vector>

namespace physdiff {

/// Fixed variance schedule. Steps are 1-based: beta(t) for t in [1, T].
struct NoiseSchedule
{
  std::vector<double> betas, alphas, alpha_bars, sigmas;

  int steps() const { return static_cast<int>(betas.size()); }
  double beta(int t) const { return betas[idx(t)]; }
  double alpha(int t) const { return alphas[idx(t)]; }
  double alpha_bar(int t) const { return alpha_bars[idx(t)]; }
  double sigma(int t) const { return sigmas[idx(t)]; }

  void check_step(int t) const
  {
    if (t < 1 || t > steps()) {
      throw ContractError("diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
    }
  }

private:
  std::size_t idx(int t) const
  {
    check_step(t);
    return static_cast<std::size_t>(t - 1);
  }
};

/// Linear betas from beta_start to beta_end inclusive, sigma_t = sqrt(beta_t).
NoiseSchedule build_schedule(int steps, double beta_start, double beta_end);

/// Schedule from explicit betas. Accepts beta = 0 (identity steps) for tests;
/// build_schedule enforces the strict range.
NoiseSchedule schedule_from_betas(std::vector<double> betas);

/// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
template <typename Scalar>
RowMatrix<Scalar> forward_diffuse(RowMatrix<Scalar> const &z0, int t, RowMatrix<Scalar> const &eps,
                                  NoiseSchedule const &s)
{
  require_same_shape(z0, eps, "forward_diffuse");
  double const ab = s.alpha_bar(t);
  return Scalar(std::sqrt(ab)) * z0 + Scalar(std::sqrt(1.0 - ab)) * eps;
}

/// z_{t-1} = (z_t - (1 - alpha_t) / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sigma_t w.
/// `w` must be all zero at t = 1.
template <typename Scalar>
RowMatrix<Scalar> reverse_step(RowMatrix<Scalar> const &zt, int t, RowMatrix<Scalar> const &eps_hat,
                               NoiseSchedule const &s, RowMatrix<Scalar> const &w)
{
  require_same_shape(zt, eps_hat, "reverse_step");
  require_same_shape(zt, w, "reverse_step noise");
  s.check_step(t);
  if (t == 1 && !w.isZero(0)) { throw ContractError("reverse_step: noise must be zero at t = 1"); }
  double const a = s.alpha(t), ab = s.alpha_bar(t);
  // beta = 0 test schedules have abar = 1; the eps coefficient is then 0
  double const coef = (1.0 - a) == 0.0 ? 0.0 : (1.0 - a) / std::sqrt(1.0 - ab);
  RowMatrix<Scalar> out = (zt - Scalar(coef) * eps_hat) / Scalar(std::sqrt(a));
  if (t > 1) { out += Scalar(s.sigma(t)) * w; }
  return out;
}

inline constexpr double kAlphaBarFloor = 1e-12;

/// z0_hat = (z_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)
template <typename Scalar>
RowMatrix<Scalar> predict_x0(RowMatrix<Scalar> const &zt, int t, RowMatrix<Scalar> const &eps_hat,
                             NoiseSchedule const &s)
{
  require_same_shape(zt, eps_hat, "predict_x0");
  double const ab = s.alpha_bar(t);
  if (ab <= kAlphaBarFloor) { throw ContractError("predict_x0: alpha_bar below numerical floor"); }
  return (zt - Scalar(std::sqrt(1.0 - ab)) * eps_hat) / Scalar(std::sqrt(ab));
}

} // namespace physdiff
