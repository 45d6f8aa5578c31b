#include "physdiff/training/loss.hpp"

#include <array>
#include <cmath>

namespace physdiff {

namespace {
struct Channels
{
  Index first, count;
};
constexpr std::array<Channels, 3> kTaskChannels = {{{0, 2}, {2, 1}, {3, 1}}};

void check_recon_shapes(Tensor const &x_hat, Tensor const &x0)
{
  require_same_shape(x_hat, x0, "recon_loss");
  if (x0.cols() != 4) { throw DimensionError("recon_loss: expected 4 attribute columns, got " + shape_str(x0)); }
}
} // namespace

double diffusion_loss(Tensor const &eps, Tensor const &eps_hat)
{
  require_same_shape(eps, eps_hat, "diffusion_loss");
  if (eps.size() == 0) { throw DimensionError("diffusion_loss: empty tensors"); }
  return (eps_hat - eps).squaredNorm() / static_cast<double>(eps.size());
}

Tensor diffusion_loss_grad(Tensor const &eps, Tensor const &eps_hat)
{
  require_same_shape(eps, eps_hat, "diffusion_loss");
  return (2.0 / static_cast<double>(eps.size())) * (eps_hat - eps);
}

ReconLoss recon_loss(Tensor const &x_hat, Tensor const &x0)
{
  check_recon_shapes(x_hat, x0);
  std::array<double, 3> v{};
  for (std::size_t k = 0; k < 3; ++k) {
    auto const [first, count] = kTaskChannels[k];
    double const n = static_cast<double>(x0.rows() * count);
    v[k] = (x_hat.middleCols(first, count) - x0.middleCols(first, count)).squaredNorm() / n;
  }
  return {v[0], v[1], v[2]};
}

Tensor recon_component_grad(Tensor const &x_hat, Tensor const &x0, std::size_t task)
{
  check_recon_shapes(x_hat, x0);
  auto const [first, count] = kTaskChannels.at(task);
  Tensor g = Tensor::Zero(x0.rows(), x0.cols());
  double const n = static_cast<double>(x0.rows() * count);
  g.middleCols(first, count) = (2.0 / n) * (x_hat.middleCols(first, count) - x0.middleCols(first, count));
  return g;
}

double total_loss(double l_diff, double l_recon, double s_diff, double s_recon)
{
  return uncertainty_weight(s_diff) * l_diff + uncertainty_weight(s_recon) * l_recon + s_diff + s_recon;
}

UncertaintyGrad total_loss_grad(double l_diff, double l_recon, double s_diff, double s_recon)
{
  return {1.0 - std::exp(-2.0 * s_diff) * l_diff, 1.0 - std::exp(-2.0 * s_recon) * l_recon};
}

} // namespace physdiff
