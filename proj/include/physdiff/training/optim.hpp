#pragma once

#include "physdiff/core/param.hpp"

#include <vector>

namespace physdiff {

/// lr_min + 0.5 (lr_max - lr_min)(1 + cos(pi step / total)), for 0 <= step <= total.
double cosine_lr(long step, long total_steps, double lr_max, double lr_min);

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParamStore &store, double max_norm);

struct AdamConfig
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers follow the store's parameter order.
class Adam
{
public:
  Adam() = default;
  Adam(ParamStore const &store, AdamConfig cfg = {});

  void step(ParamStore &store, double lr);
  long steps_taken() const { return t_; }

  std::vector<Tensor> const &first_moments() const { return m_; }
  std::vector<Tensor> const &second_moments() const { return v_; }

private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

} // namespace physdiff
