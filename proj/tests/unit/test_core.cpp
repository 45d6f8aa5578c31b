#include "helpers.hpp"

#include "physdiff/core/layers.hpp"

#include <cmath>

using namespace physdiff;
using physdiff::test::check_all;
using physdiff::test::leaf;
using physdiff::test::mat;

TEST_SUITE("dense")
{
  TEST_CASE("identity weights pass the input through")
  {
    Tensor y = dense<double>(mat({{1, 2}}), mat({{1, 0}, {0, 1}}), mat({{0, 0}}));
    CHECK(y == mat({{1, 2}}));
  }

  TEST_CASE("zero weights yield the bias")
  {
    Tensor y = dense<double>(mat({{1, 2}}), mat({{0, 0}, {0, 0}}), mat({{3, 4}}));
    CHECK(y == mat({{3, 4}}));
  }

  TEST_CASE("general case matches a scalar loop")
  {
    Tensor const x = mat({{1, 2}}), w = mat({{1, 2}, {3, 4}}), b = mat({{1, 1}});
    Tensor oracle(1, 2);
    for (Index j = 0; j < 2; ++j) {
      double acc = b(0, j);
      for (Index k = 0; k < 2; ++k) {
        acc += x(0, k) * w(k, j);
      }
      oracle(0, j) = acc;
    }
    CHECK(oracle == mat({{8, 11}}));
    CHECK(dense<double>(x, w, b) == oracle);
  }

  TEST_CASE("shape mismatch names both shapes")
  {
    CHECK_THROWS_WITH_AS(dense<double>(mat({{1, 2, 3}}), mat({{1, 0}, {0, 1}}), mat({{0, 0}})),
                         doctest::Contains("1x3"), DimensionError);
  }

  TEST_CASE("backward matches central differences over random shapes")
  {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      Index const n = rng.uniform_int(1, 4), din = rng.uniform_int(1, 5), dout = rng.uniform_int(1, 5);
      Param x = leaf("x", rng.normal_tensor(n, din));
      Param w = leaf("W", rng.normal_tensor(din, dout));
      Param b = leaf("b", rng.normal_tensor(1, dout));
      Tensor const r = rng.normal_tensor(n, dout);
      auto loss = [&] { return dense<double>(x.value, w.value, b.value).cwiseProduct(r).sum(); };
      x.grad = dense_backward<double>(x.value, w.value, r, w.grad, b.grad);
      CHECK(check_all(loss, {&x, &w, &b}) < 1e-6);
    }
  }
}

TEST_SUITE("attention")
{
  TEST_CASE("a single key returns its value")
  {
    Tensor out = attention<double>(mat({{0.3, -2}}), mat({{1, 5}}), mat({{3, 7}}));
    CHECK(out(0, 0) == doctest::Approx(3).epsilon(1e-15));
    CHECK(out(0, 1) == doctest::Approx(7).epsilon(1e-15));
  }

  TEST_CASE("identical keys give uniform weights")
  {
    Tensor out = attention<double>(mat({{1, 2}, {-3, 4}}), mat({{0.5, 0.5}, {0.5, 0.5}}), mat({{1, 0}, {0, 1}}));
    for (Index i = 0; i < 2; ++i) {
      CHECK(out(i, 0) == doctest::Approx(0.5));
      CHECK(out(i, 1) == doctest::Approx(0.5));
    }
  }

  TEST_CASE("two-key case matches a scalar softmax")
  {
    double const s0 = 10.0 / std::sqrt(2.0), s1 = 0.0;
    double const p0 = std::exp(s0) / (std::exp(s0) + std::exp(s1));
    CHECK(p0 == doctest::Approx(0.99915).epsilon(1e-5));
    Tensor out = attention<double>(mat({{10, 0}}), mat({{1, 0}, {0, 1}}), mat({{1, 0}, {0, 1}}));
    CHECK(out(0, 0) == doctest::Approx(p0).epsilon(1e-14));
    CHECK(out(0, 1) == doctest::Approx(1 - p0).epsilon(1e-12));
    CHECK(out(0, 0) == doctest::Approx(0.99915).epsilon(1e-5));
    CHECK(out(0, 1) == doctest::Approx(0.00085).epsilon(1e-2));
  }

  TEST_CASE("empty keys are rejected")
  {
    CHECK_THROWS_WITH_AS(attention<double>(mat({{1, 2}}), Tensor(0, 2), Tensor(0, 2)),
                         doctest::Contains("empty keys"), DimensionError);
  }

  TEST_CASE("outputs stay inside the convex hull of the values")
  {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      Index const nq = rng.uniform_int(1, 5), nk = rng.uniform_int(1, 6), d = rng.uniform_int(1, 4),
                  dv = rng.uniform_int(1, 4);
      Tensor const q = 3.0 * rng.normal_tensor(nq, d), k = 3.0 * rng.normal_tensor(nk, d), v = rng.normal_tensor(nk, dv);
      Tensor const out = attention(q, k, v);
      for (Index j = 0; j < dv; ++j) {
        CHECK(out.col(j).minCoeff() >= v.col(j).minCoeff() - 1e-9);
        CHECK(out.col(j).maxCoeff() <= v.col(j).maxCoeff() + 1e-9);
      }
    }
  }

  TEST_CASE("backward matches central differences over random shapes")
  {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      Index const nq = rng.uniform_int(1, 4), nk = rng.uniform_int(1, 4), d = rng.uniform_int(1, 4),
                  dv = rng.uniform_int(1, 3);
      Param q = leaf("Q", rng.normal_tensor(nq, d)), k = leaf("K", rng.normal_tensor(nk, d)),
            v = leaf("V", rng.normal_tensor(nk, dv));
      Tensor const r = rng.normal_tensor(nq, dv);
      auto loss = [&] { return attention(q.value, k.value, v.value).cwiseProduct(r).sum(); };
      AttentionCache<double> c;
      attention(q.value, k.value, v.value, &c);
      auto const g = attention_backward(c, r);
      q.grad = g.dq;
      k.grad = g.dk;
      v.grad = g.dv;
      CHECK(check_all(loss, {&q, &k, &v}) < 1e-4);
    }
  }
}

TEST_SUITE("layer_norm")
{
  TEST_CASE("constant row maps to zeros")
  {
    Tensor y = layer_norm<double>(mat({{2.5, 2.5, 2.5}}), mat({{1, 1, 1}}), mat({{0, 0, 0}}));
    CHECK(y.cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("two-element row with unit population variance")
  {
    Tensor y = layer_norm<double>(mat({{1, -1}}), mat({{1, 1}}), mat({{0, 0}}));
    // population variance is exactly 1, so only eps perturbs the result
    double const expect = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(y(0, 0) - 1.0) < 1e-4);
    CHECK(std::abs(y(0, 1) + 1.0) < 1e-4);
  }

  TEST_CASE("invariant under per-row shifts")
  {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      Index const n = rng.uniform_int(1, 4), d = rng.uniform_int(2, 6);
      Tensor const x = rng.normal_tensor(n, d), g = rng.normal_tensor(1, d), b = rng.normal_tensor(1, d);
      Tensor shifted = x;
      for (Index i = 0; i < n; ++i) {
        shifted.row(i).array() += rng.uniform(-50, 50);
      }
      CHECK((layer_norm(x, g, b) - layer_norm(shifted, g, b)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("backward matches central differences over random shapes")
  {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      Index const n = rng.uniform_int(1, 4), d = rng.uniform_int(2, 6);
      Param x = leaf("x", rng.normal_tensor(n, d)), g = leaf("gamma", rng.normal_tensor(1, d)),
            b = leaf("beta", rng.normal_tensor(1, d));
      Tensor const r = rng.normal_tensor(n, d);
      // extended precision keeps the difference quotient above rounding noise
      // when d = 2 leaves x with gradients of order eps
      using Wide = RowMatrix<long double>;
      auto wide_loss = [&] {
        Wide const y = layer_norm<long double>(x.value.cast<long double>(), g.value.cast<long double>(),
                                               b.value.cast<long double>(), 1e-5L);
        return y.cwiseProduct(r.cast<long double>()).sum();
      };
      long double const base = wide_loss();
      auto loss = [&] { return static_cast<double>(wide_loss() - base); };
      LayerNormCache<double> c;
      layer_norm(x.value, g.value, b.value, 1e-5, &c);
      x.grad = layer_norm_backward(c, g.value, r, &g.grad, &b.grad);
      CHECK(check_all(loss, {&x, &g, &b}) < 1e-4);
    }
  }
}

TEST_SUITE("gru_cell")
{
  // literal transcription of the gate formulas, one scalar at a time
  Tensor gru_oracle(Tensor const &x, Tensor const &h, Tensor const &wx, Tensor const &uh, Tensor const &b)
  {
    Index const dh = h.cols();
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    Tensor out(1, dh);
    std::vector<double> r(static_cast<std::size_t>(dh));
    for (Index j = 0; j < dh; ++j) {
      double ar = b(0, dh + j);
      for (Index k = 0; k < x.cols(); ++k) {
        ar += x(0, k) * wx(k, dh + j);
      }
      for (Index k = 0; k < dh; ++k) {
        ar += h(0, k) * uh(k, dh + j);
      }
      r[static_cast<std::size_t>(j)] = sig(ar);
    }
    for (Index j = 0; j < dh; ++j) {
      double az = b(0, j), an = b(0, 2 * dh + j);
      for (Index k = 0; k < x.cols(); ++k) {
        az += x(0, k) * wx(k, j);
        an += x(0, k) * wx(k, 2 * dh + j);
      }
      for (Index k = 0; k < dh; ++k) {
        az += h(0, k) * uh(k, j);
        an += r[static_cast<std::size_t>(k)] * h(0, k) * uh(k, 2 * dh + j);
      }
      double const z = sig(az), n = std::tanh(an);
      out(0, j) = (1 - z) * h(0, j) + z * n;
    }
    return out;
  }

  TEST_CASE("zero weights halve the previous state")
  {
    Tensor const wx = Tensor::Zero(3, 6), uh = Tensor::Zero(2, 6), b = Tensor::Zero(1, 6);
    Tensor const h = mat({{0.8, -0.4}});
    Tensor out = gru_cell<double>(mat({{1, 2, 3}}), h, {wx, uh, b});
    CHECK(out(0, 0) == doctest::Approx(0.4));
    CHECK(out(0, 1) == doctest::Approx(-0.2));
  }

  TEST_CASE("saturated update gate takes the candidate")
  {
    Tensor const wx = Tensor::Zero(1, 6), uh = Tensor::Zero(2, 6);
    Tensor b = Tensor::Zero(1, 6);
    b.leftCols(2).setConstant(20.0);
    Tensor out = gru_cell<double>(mat({{1}}), mat({{0.7, -0.9}}), {wx, uh, b});
    CHECK(std::abs(out(0, 0)) < 1e-8);
    CHECK(std::abs(out(0, 1)) < 1e-8);
  }

  TEST_CASE("random two-dimensional case matches the scalar oracle")
  {
    Rng rng(42);
    Tensor const x = rng.normal_tensor(1, 2), h = rng.normal_tensor(1, 2), wx = rng.normal_tensor(2, 6),
                 uh = rng.normal_tensor(2, 6), b = rng.normal_tensor(1, 6);
    Tensor const got = gru_cell<double>(x, h, {wx, uh, b});
    Tensor const want = gru_oracle(x, h, wx, uh, b);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("output bounded by the previous state and the tanh range")
  {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      Index const din = rng.uniform_int(1, 4), dh = rng.uniform_int(1, 4);
      Tensor const x = 3 * rng.normal_tensor(1, din), h = 2 * rng.normal_tensor(1, dh),
                   wx = rng.normal_tensor(din, 3 * dh), uh = rng.normal_tensor(dh, 3 * dh), b = rng.normal_tensor(1, 3 * dh);
      Tensor const out = gru_cell<double>(x, h, {wx, uh, b});
      CHECK(out.cwiseAbs().maxCoeff() <= std::max(h.cwiseAbs().maxCoeff(), 1.0) + 1e-12);
    }
  }

  TEST_CASE("backward matches central differences over random shapes")
  {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      Index const din = rng.uniform_int(1, 4), dh = rng.uniform_int(1, 4);
      // moderate weights keep the gates away from saturation, where gradients
      // shrink below the resolution of central differences
      Param x = leaf("x", rng.normal_tensor(1, din)), h = leaf("h", rng.normal_tensor(1, dh)),
            wx = leaf("Wx", 0.5 * rng.normal_tensor(din, 3 * dh)), uh = leaf("Uh", 0.5 * rng.normal_tensor(dh, 3 * dh)),
            b = leaf("b", 0.5 * rng.normal_tensor(1, 3 * dh));
      Tensor const r = rng.normal_tensor(1, dh);
      auto loss = [&] { return gru_cell<double>(x.value, h.value, {wx.value, uh.value, b.value}).cwiseProduct(r).sum(); };
      GruCache<double> c;
      gru_cell<double>(x.value, h.value, {wx.value, uh.value, b.value}, &c);
      auto const g = gru_cell_backward<double>(c, {wx.value, uh.value, b.value}, r, wx.grad, uh.grad, b.grad);
      x.grad = g.dx;
      h.grad = g.dh;
      CHECK(check_all(loss, {&x, &h, &wx, &uh, &b}) < 1e-4);
    }
  }
}

TEST_SUITE("activations")
{
  TEST_CASE("gelu backward matches central differences")
  {
    Rng rng(3);
    Param x = leaf("x", 2.0 * rng.normal_tensor(5, 7));
    Tensor const r = rng.normal_tensor(5, 7);
    auto loss = [&] { return gelu(x.value).cwiseProduct(r).sum(); };
    x.grad = gelu_backward(x.value, r);
    CHECK(check_all(loss, {&x}) < 1e-6);
  }

  TEST_CASE("sigmoid of zero is one half")
  {
    CHECK(sigmoid(0.0) == 0.5);
  }

  TEST_CASE("single-precision forward agrees with double")
  {
    Rng rng(8);
    Tensor const q = rng.normal_tensor(3, 4), k = rng.normal_tensor(5, 4), v = rng.normal_tensor(5, 2);
    RowMatrix<float> const out = attention<float>(q.cast<float>(), k.cast<float>(), v.cast<float>());
    CHECK((out.cast<double>() - attention(q, k, v)).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_SUITE("gradient_check")
{
  TEST_CASE("quadratic is exact under central differences")
  {
    Param theta = leaf("theta", mat({{3.0}}));
    theta.grad(0, 0) = 6.0;
    auto loss = [&] { return theta.value(0, 0) * theta.value(0, 0); };
    CHECK(check_all(loss, {&theta}) < 1e-9);
  }

  TEST_CASE("dense layer with squared loss")
  {
    ParamStore store;
    Rng rng(5);
    Linear lin(store, "lin", 4, 3, rng);
    Tensor const x = rng.normal_tensor(6, 4), y = rng.normal_tensor(6, 3);
    auto loss = [&] { return (lin.forward(x) - y).squaredNorm(); };
    store.zero_grad();
    lin.backward(x, 2.0 * (lin.forward(x) - y));
    CHECK(check_all(loss, test::all_params(store)) < 1e-6);
  }

  TEST_CASE("non-finite loss is an error")
  {
    Param p = leaf("p", mat({{1.0}}));
    auto loss = [&] { return std::log(p.value(0, 0) - 1.0); };
    Rng rng(1);
    CHECK_THROWS_AS(gradient_check(loss, {&p}, 1e-5, 1, rng), DivergenceError);
  }

  TEST_CASE("relative error uses the floored denominator")
  {
    CHECK(relative_error(0.0, 0.0) == 0.0);
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(1e-9, 0.0) == doctest::Approx(0.1));
    CHECK(relative_error(1.0, 3.0) == doctest::Approx(0.5));
  }
}
