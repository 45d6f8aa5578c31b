#pragma once

// Differentiable primitives with explicit backward passes. All functions are
// templated on the scalar so inference can run in float while training and
// tests stay in double. Backward functions accumulate (+=) into parameter
// gradients and return the input gradient.

#include "types.hpp"

#include <cmath>
#include <numbers>

namespace physdiff {

// ---------------------------------------------------------------------------
// Activations

template <typename Scalar>
Scalar sigmoid(Scalar x)
{
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
RowMatrix<Scalar> sigmoid(RowMatrix<Scalar> const &x)
{
  return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

/// tanh-approximated GELU.
template <typename Scalar>
RowMatrix<Scalar> gelu(RowMatrix<Scalar> const &x)
{
  Scalar const c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  return x.unaryExpr([c](Scalar v) {
    Scalar const u = c * (v + Scalar(0.044715) * v * v * v);
    return Scalar(0.5) * v * (Scalar(1) + std::tanh(u));
  });
}

template <typename Scalar>
RowMatrix<Scalar> gelu_backward(RowMatrix<Scalar> const &x, RowMatrix<Scalar> const &dy)
{
  Scalar const c = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  RowMatrix<Scalar> d = x.unaryExpr([c](Scalar v) {
    Scalar const u = c * (v + Scalar(0.044715) * v * v * v);
    Scalar const th = std::tanh(u);
    Scalar const du = c * (Scalar(1) + Scalar(3 * 0.044715) * v * v);
    return Scalar(0.5) * (Scalar(1) + th) + Scalar(0.5) * v * (Scalar(1) - th * th) * du;
  });
  return d.cwiseProduct(dy);
}

// ---------------------------------------------------------------------------
// Dense

inline constexpr Index kSmallRows = 16;

template <typename Scalar>
RowMatrix<Scalar> dense(RowMatrix<Scalar> const &x, RowMatrix<Scalar> const &W, RowMatrix<Scalar> const &b)
{
  if (x.cols() != W.rows() || b.rows() != 1 || b.cols() != W.cols()) {
    throw DimensionError("dense: x " + shape_str(x) + ", W " + shape_str(W) + ", b " + shape_str(b));
  }
  RowMatrix<Scalar> y(x.rows(), W.cols());
  // a handful of rows does not amortize the packing of a blocked product
  if (x.rows() <= kSmallRows) {
    y.noalias() = x.lazyProduct(W);
  } else {
    y.noalias() = x * W;
  }
  y.rowwise() += b.row(0);
  return y;
}

template <typename Scalar>
RowMatrix<Scalar> dense_backward(RowMatrix<Scalar> const &x,
                                 RowMatrix<Scalar> const &W,
                                 RowMatrix<Scalar> const &dy,
                                 RowMatrix<Scalar> &dW,
                                 RowMatrix<Scalar> &db)
{
  dW.noalias() += x.transpose() * dy;
  db += dy.colwise().sum();
  return dy * W.transpose();
}

// ---------------------------------------------------------------------------
// Scaled dot-product attention

template <typename Scalar>
void softmax_rows_inplace(RowMatrix<Scalar> &s)
{
  for (Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

template <typename Scalar>
struct AttentionCache
{
  RowMatrix<Scalar> q, k, v, probs;
  Scalar scale = 1;
};

template <typename Scalar>
struct AttentionGrads
{
  RowMatrix<Scalar> dq, dk, dv;
};

/// softmax(Q K^T / sqrt(d)) V. The cache is optional and only needed for backward.
template <typename Scalar>
RowMatrix<Scalar> attention(RowMatrix<Scalar> const &q,
                            RowMatrix<Scalar> const &k,
                            RowMatrix<Scalar> const &v,
                            AttentionCache<Scalar> *cache = nullptr)
{
  if (k.rows() == 0) { throw DimensionError("attention: empty keys"); }
  if (q.cols() == 0 || q.cols() != k.cols() || k.rows() != v.rows()) {
    throw DimensionError("attention: Q " + shape_str(q) + ", K " + shape_str(k) + ", V " + shape_str(v));
  }
  Scalar const scale = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  RowMatrix<Scalar> probs = (q * k.transpose()) * scale;
  softmax_rows_inplace(probs);
  RowMatrix<Scalar> out = probs * v;
  if (cache) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->probs = std::move(probs);
    cache->scale = scale;
  }
  return out;
}

template <typename Scalar>
AttentionGrads<Scalar> attention_backward(AttentionCache<Scalar> const &c, RowMatrix<Scalar> const &dout)
{
  AttentionGrads<Scalar> g;
  g.dv = c.probs.transpose() * dout;
  RowMatrix<Scalar> dp = dout * c.v.transpose();
  // softmax Jacobian, row by row: ds = p * (dp - <dp, p>)
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> const dots = dp.cwiseProduct(c.probs).rowwise().sum();
  RowMatrix<Scalar> ds = c.probs.cwiseProduct(dp.colwise() - dots) * c.scale;
  g.dq = ds * c.k;
  g.dk = ds.transpose() * c.q;
  return g;
}

// ---------------------------------------------------------------------------
// Layer normalization

template <typename Scalar>
struct LayerNormCache
{
  RowMatrix<Scalar> xhat;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
};

/// Row-wise normalization with population variance. gamma/beta may be empty
/// (0 x 0) for a parameter-free normalization.
template <typename Scalar>
RowMatrix<Scalar> layer_norm(RowMatrix<Scalar> const &x,
                             RowMatrix<Scalar> const &gamma,
                             RowMatrix<Scalar> const &beta,
                             Scalar eps = Scalar(1e-5),
                             LayerNormCache<Scalar> *cache = nullptr)
{
  Index const d = x.cols();
  if (d < 1) { throw DimensionError("layer_norm: zero-width input"); }
  bool const affine = gamma.size() > 0;
  if (affine && (gamma.cols() != d || beta.cols() != d)) {
    throw DimensionError("layer_norm: x " + shape_str(x) + ", gamma " + shape_str(gamma));
  }
  RowMatrix<Scalar> xhat(x.rows(), d);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar const mean = x.row(i).mean();
    auto const centered = (x.row(i).array() - mean);
    Scalar const var = centered.square().mean();
    inv_std(i) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = (centered * inv_std(i)).matrix();
  }
  RowMatrix<Scalar> y = xhat;
  if (affine) {
    y.array().rowwise() *= gamma.row(0).array();
    y.rowwise() += beta.row(0);
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

/// dgamma/dbeta may be null for the parameter-free variant.
template <typename Scalar>
RowMatrix<Scalar> layer_norm_backward(LayerNormCache<Scalar> const &c,
                                      RowMatrix<Scalar> const &gamma,
                                      RowMatrix<Scalar> const &dy,
                                      RowMatrix<Scalar> *dgamma,
                                      RowMatrix<Scalar> *dbeta)
{
  RowMatrix<Scalar> dxhat = dy;
  if (gamma.size() > 0) {
    *dgamma += dy.cwiseProduct(c.xhat).colwise().sum();
    *dbeta += dy.colwise().sum();
    dxhat.array().rowwise() *= gamma.row(0).array();
  }
  RowMatrix<Scalar> dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    Scalar const m1 = dxhat.row(i).mean();
    Scalar const m2 = dxhat.row(i).cwiseProduct(c.xhat.row(i)).mean();
    dx.row(i) = (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2) * c.inv_std(i);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// GRU cell
//
// Gate layout along the 3*d_h axis is [z | r | n]:
//   z  = sigmoid(x Wz + h Uz + bz)
//   r  = sigmoid(x Wr + h Ur + br)
//   n  = tanh(x Wn + (r * h) Un + bn)
//   h' = (1 - z) * h + z * n

template <typename Scalar>
struct GruWeights
{
  RowMatrix<Scalar> const &wx; // d_in x 3 d_h
  RowMatrix<Scalar> const &uh; // d_h x 3 d_h
  RowMatrix<Scalar> const &b;  // 1 x 3 d_h
};

template <typename Scalar>
struct GruCache
{
  RowMatrix<Scalar> x, h, z, r, n;
};

template <typename Scalar>
RowMatrix<Scalar> gru_cell(RowMatrix<Scalar> const &x,
                           RowMatrix<Scalar> const &h,
                           GruWeights<Scalar> const &w,
                           GruCache<Scalar> *cache = nullptr)
{
  Index const dh = h.cols();
  if (x.rows() != 1 || h.rows() != 1 || w.wx.rows() != x.cols() || w.wx.cols() != 3 * dh ||
      w.uh.rows() != dh || w.uh.cols() != 3 * dh || w.b.cols() != 3 * dh) {
    throw DimensionError("gru_cell: x " + shape_str(x) + ", h " + shape_str(h) + ", Wx " + shape_str(w.wx) +
                         ", Uh " + shape_str(w.uh));
  }
  RowMatrix<Scalar> a = x * w.wx + w.b;
  RowMatrix<Scalar> const hz = h * w.uh.middleCols(0, dh);
  RowMatrix<Scalar> const hr = h * w.uh.middleCols(dh, dh);
  RowMatrix<Scalar> z = sigmoid<Scalar>(a.middleCols(0, dh) + hz);
  RowMatrix<Scalar> r = sigmoid<Scalar>(a.middleCols(dh, dh) + hr);
  RowMatrix<Scalar> const rh = r.cwiseProduct(h);
  RowMatrix<Scalar> n = (a.middleCols(2 * dh, dh) + rh * w.uh.middleCols(2 * dh, dh)).array().tanh().matrix();
  RowMatrix<Scalar> out = (RowMatrix<Scalar>::Ones(1, dh) - z).cwiseProduct(h) + z.cwiseProduct(n);
  if (cache) {
    cache->x = x;
    cache->h = h;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
  }
  return out;
}

template <typename Scalar>
struct GruGrads
{
  RowMatrix<Scalar> dx, dh;
};

template <typename Scalar>
GruGrads<Scalar> gru_cell_backward(GruCache<Scalar> const &c,
                                   GruWeights<Scalar> const &w,
                                   RowMatrix<Scalar> const &dout,
                                   RowMatrix<Scalar> &dwx,
                                   RowMatrix<Scalar> &duh,
                                   RowMatrix<Scalar> &db)
{
  Index const dh = c.h.cols();
  auto const ones = RowMatrix<Scalar>::Ones(1, dh);
  RowMatrix<Scalar> const dz = dout.cwiseProduct(c.n - c.h);
  RowMatrix<Scalar> const dn = dout.cwiseProduct(c.z);
  RowMatrix<Scalar> dhp = dout.cwiseProduct(ones - c.z);

  RowMatrix<Scalar> da(1, 3 * dh);
  da.middleCols(2 * dh, dh) = dn.cwiseProduct(ones - c.n.cwiseProduct(c.n));
  RowMatrix<Scalar> const rh = c.r.cwiseProduct(c.h);
  duh.middleCols(2 * dh, dh).noalias() += rh.transpose() * da.middleCols(2 * dh, dh);
  RowMatrix<Scalar> const drh = da.middleCols(2 * dh, dh) * w.uh.middleCols(2 * dh, dh).transpose();
  RowMatrix<Scalar> const dr = drh.cwiseProduct(c.h);
  dhp += drh.cwiseProduct(c.r);

  da.middleCols(0, dh) = dz.cwiseProduct(c.z.cwiseProduct(ones - c.z));
  da.middleCols(dh, dh) = dr.cwiseProduct(c.r.cwiseProduct(ones - c.r));
  duh.middleCols(0, dh).noalias() += c.h.transpose() * da.middleCols(0, dh);
  duh.middleCols(dh, dh).noalias() += c.h.transpose() * da.middleCols(dh, dh);
  dhp.noalias() += da.middleCols(0, dh) * w.uh.middleCols(0, dh).transpose();
  dhp.noalias() += da.middleCols(dh, dh) * w.uh.middleCols(dh, dh).transpose();

  dwx.noalias() += c.x.transpose() * da;
  db += da;
  return {da * w.wx.transpose(), dhp};
}

} // namespace physdiff
