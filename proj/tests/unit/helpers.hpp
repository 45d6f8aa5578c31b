#pragma once

#include "physdiff/core/gradcheck.hpp"

#include <doctest.h>

#include <string>
#include <vector>

namespace physdiff::test {

inline Param leaf(std::string name, Tensor value)
{
  Param p{std::move(name), std::move(value), Tensor()};
  p.grad = Tensor::Zero(p.value.rows(), p.value.cols());
  return p;
}

inline Tensor mat(std::initializer_list<std::initializer_list<double>> rows)
{
  Tensor t(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (auto const &r : rows) {
    Index j = 0;
    for (double v : r) {
      t(i, j++) = v;
    }
    ++i;
  }
  return t;
}

/// Checks every scalar of `params` (or `samples` of them) against central differences.
inline double check_all(std::function<double()> const &loss, std::vector<Param *> const &params,
                        std::size_t samples = 1u << 30, std::uint64_t seed = 1)
{
  Rng rng(seed);
  return gradient_check(loss, params, 1e-5, samples, rng).max_rel_error;
}

inline std::vector<Param *> all_params(ParamStore &store)
{
  std::vector<Param *> out;
  for (auto &p : store) {
    out.push_back(p.get());
  }
  return out;
}

} // namespace physdiff::test
