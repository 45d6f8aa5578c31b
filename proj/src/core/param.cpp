#include "physdiff/core/param.hpp"

#include <Eigen/QR>

#include <cmath>

namespace physdiff {

Param &ParamStore::add(std::string name, Index rows, Index cols)
{
  if (find(name)) { throw ConfigError("duplicate parameter name: " + name); }
  auto p = std::make_unique<Param>();
  p->name = std::move(name);
  p->value = Tensor::Zero(rows, cols);
  p->grad = Tensor::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Param *ParamStore::find(std::string const &name)
{
  for (auto &p : params_) {
    if (p->name == name) { return p.get(); }
  }
  return nullptr;
}

Param const *ParamStore::find(std::string const &name) const
{
  for (auto const &p : params_) {
    if (p->name == name) { return p.get(); }
  }
  return nullptr;
}

void ParamStore::zero_grad()
{
  for (auto &p : params_) {
    p->grad.setZero();
  }
}

double ParamStore::grad_norm() const
{
  double sq = 0.0;
  for (auto const &p : params_) {
    sq += p->grad.squaredNorm();
  }
  return std::sqrt(sq);
}

void ParamStore::scale_grad(double factor)
{
  for (auto &p : params_) {
    p->grad *= factor;
  }
}

Index ParamStore::scalar_count() const
{
  Index n = 0;
  for (auto const &p : params_) {
    n += p->value.size();
  }
  return n;
}

namespace init {

void glorot_uniform(Tensor &w, Rng &rng)
{
  double const limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Index i = 0; i < w.size(); ++i) {
    w.data()[i] = rng.uniform(-limit, limit);
  }
}

void orthogonal(Tensor &w, Rng &rng)
{
  Index const n = std::max(w.rows(), w.cols());
  Eigen::MatrixXd g(n, n);
  for (Index i = 0; i < g.size(); ++i) {
    g.data()[i] = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // sign fix so the factorization is unique
  for (Index j = 0; j < n; ++j) {
    if (qr.matrixQR()(j, j) < 0) { q.col(j) *= -1.0; }
  }
  w = q.topLeftCorner(w.rows(), w.cols());
}

void normal(Tensor &w, Rng &rng, double stddev)
{
  for (Index i = 0; i < w.size(); ++i) {
    w.data()[i] = rng.normal(0.0, stddev);
  }
}

} // namespace init
} // namespace physdiff
