#include "physdiff/training/optim.hpp"

#include <cmath>
#include <numbers>

namespace physdiff {

double cosine_lr(long step, long total_steps, double lr_max, double lr_min)
{
  if (total_steps < 1) { throw ConfigError("cosine_lr: total_steps must be >= 1"); }
  if (step < 0 || step > total_steps) {
    throw ContractError("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  double const phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

double clip_grad_norm(ParamStore &store, double max_norm)
{
  double const norm = store.grad_norm();
  if (std::isfinite(norm) && norm > max_norm) { store.scale_grad(max_norm / norm); }
  return norm;
}

Adam::Adam(ParamStore const &store, AdamConfig cfg)
  : cfg_(cfg)
{
  for (auto const &p : store) {
    m_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(ParamStore &store, double lr)
{
  if (store.size() != m_.size()) { throw ContractError("adam: optimizer state does not match parameter store"); }
  ++t_;
  double const c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double const c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Param &p = store[i];
    auto m = m_[i].array();
    auto v = v_[i].array();
    auto const g = p.grad.array();
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.square();
    p.value.array() -= lr * (m / c1) / ((v / c2).sqrt() + cfg_.eps);
  }
}

} // namespace physdiff
