#pragma once

#include "rng.hpp"
#include "types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace physdiff {

/// A named learnable tensor with its gradient accumulator.
struct Param
{
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Owns every learnable tensor of a model. Addresses are stable for the store's
/// lifetime, so layers hold plain Param pointers into it.
class ParamStore
{
public:
  ParamStore() = default;
  ParamStore(ParamStore const &) = delete;
  ParamStore &operator=(ParamStore const &) = delete;
  ParamStore(ParamStore &&) = default;
  ParamStore &operator=(ParamStore &&) = default;

  /// Zero-filled parameter. Names must be unique.
  Param &add(std::string name, Index rows, Index cols);

  Param *find(std::string const &name);
  Param const *find(std::string const &name) const;

  void zero_grad();
  double grad_norm() const;
  void scale_grad(double factor);
  Index scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }
  Param &operator[](std::size_t i) { return *params_[i]; }
  Param const &operator[](std::size_t i) const { return *params_[i]; }

private:
  std::vector<std::unique_ptr<Param>> params_;
};

namespace init {
/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor &w, Rng &rng);
/// Orthonormal columns from the QR factorization of a Gaussian matrix.
void orthogonal(Tensor &w, Rng &rng);
void normal(Tensor &w, Rng &rng, double stddev);
} // namespace init

} // namespace physdiff
