#pragma once

#include <Eigen/Core>

#include <sstream>
#include <stdexcept>
#include <string>

namespace physdiff {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Every activation, parameter and gradient in the model is a 2-D row-major
/// 64-bit tensor. Vectors (biases, tokens) are stored as 1 x d rows.
using Tensor = RowMatrix<double>;
using Index = Eigen::Index;

struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error
{
  using Error::Error;
};
struct ConfigError : Error
{
  using Error::Error;
};
struct ParseError : Error
{
  using Error::Error;
};
struct ValidationError : Error
{
  using Error::Error;
};
struct ContractError : Error
{
  using Error::Error;
};
struct DivergenceError : Error
{
  using Error::Error;
};
struct CheckpointError : Error
{
  using Error::Error;
};

template <typename Derived>
std::string shape_str(Eigen::DenseBase<Derived> const &m)
{
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

template <typename A, typename B>
void require_same_shape(Eigen::DenseBase<A> const &a, Eigen::DenseBase<B> const &b, char const *what)
{
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename Derived>
bool all_finite(Eigen::DenseBase<Derived> const &m)
{
  return m.derived().array().isFinite().all();
}

} // namespace physdiff
