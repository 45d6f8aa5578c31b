#pragma once

#include "physdiff/core/types.hpp"

#include <cmath>

namespace physdiff {

/// Mean squared error over every element.
double diffusion_loss(Tensor const &eps, Tensor const &eps_hat);
/// d diffusion_loss / d eps_hat.
Tensor diffusion_loss_grad(Tensor const &eps, Tensor const &eps_hat);

/// Reconstruction loss split by task. Channels: trajectory {0, 1}, wind {2},
/// pressure {3}; each component is the MSE over its own channels.
struct ReconLoss
{
  double traj = 0.0;
  double wind = 0.0;
  double pres = 0.0;

  double total() const { return traj + wind + pres; }
  double component(std::size_t task) const { return task == 0 ? traj : (task == 1 ? wind : pres); }
};

ReconLoss recon_loss(Tensor const &x_hat, Tensor const &x0);
/// Gradient of one component (0 traj, 1 wind, 2 pres) w.r.t. x_hat; zero outside its channels.
Tensor recon_component_grad(Tensor const &x_hat, Tensor const &x0, std::size_t task);

/// 0.5 exp(-2 s_d) L_d + 0.5 exp(-2 s_r) L_r + s_d + s_r, where s = log sigma.
double total_loss(double l_diff, double l_recon, double s_diff, double s_recon);

struct UncertaintyGrad
{
  double s_diff = 0.0;
  double s_recon = 0.0;
};
UncertaintyGrad total_loss_grad(double l_diff, double l_recon, double s_diff, double s_recon);

/// Multipliers of L_diff and L_recon inside total_loss.
inline double uncertainty_weight(double s) { return 0.5 * std::exp(-2.0 * s); }

} // namespace physdiff
