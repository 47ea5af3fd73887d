#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "lucie/grid.hpp"
#include "lucie/tensor.hpp"

using namespace lucie;
using ad::Tape;
using ad::Var;

namespace {

std::vector<double> randvec(size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = gauss(rng);
  return v;
}

// Central finite-difference gradient of a scalar function of one leaf,
// compared against the tape gradient.
void check_gradient(const std::vector<double>& x0, const std::vector<int>& shape,
                    const std::function<Var(Tape&, Var)>& f, double tol = 1e-6,
                    double h = 1e-6) {
  Tape tape;
  Var x = tape.leaf(x0, shape, true);
  Var loss = f(tape, x);
  REQUIRE(tape.value(loss).size() == 1);
  tape.backward(loss);
  auto grad = tape.grad(x);
  REQUIRE(grad.size() == x0.size());
  for (size_t i = 0; i < x0.size(); ++i) {
    auto eval = [&](double xi) {
      Tape t2;
      std::vector<double> xp = x0;
      xp[i] = xi;
      return t2.value(f(t2, t2.leaf(xp, shape, false)))[0];
    };
    double fd = (eval(x0[i] + h) - eval(x0[i] - h)) / (2.0 * h);
    double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    CHECK(std::abs(grad[i] - fd) / denom < tol);
  }
}

}  // namespace

TEST_CASE("elementwise primitives: forward values") {
  // [TRIVIAL] hand-checked arithmetic.
  Tape t;
  Var a = t.leaf({1.0, -2.0, 3.0}, {3}, false);
  Var b = t.leaf({4.0, 5.0, -6.0}, {3}, false);
  CHECK(t.value(t.add(a, b)) == std::vector<double>{5.0, 3.0, -3.0});
  CHECK(t.value(t.sub(a, b)) == std::vector<double>{-3.0, -7.0, 9.0});
  CHECK(t.value(t.mul(a, b)) == std::vector<double>{4.0, -10.0, -18.0});
  CHECK(t.value(t.scale(a, -2.0)) == std::vector<double>{-2.0, 4.0, -6.0});
  CHECK(t.value(t.sum(a))[0] == doctest::Approx(2.0));
  double c[3] = {1.0, 0.0, 2.0};
  CHECK(t.value(t.dot_const(a, c))[0] == doctest::Approx(7.0));
  // silu(x) = x * sigmoid(x); silu(0) = 0, silu(1) = 1/(1+e^-1).
  Var s = t.silu(t.leaf({0.0, 1.0}, {2}, false));
  CHECK(t.value(s)[0] == doctest::Approx(0.0));
  CHECK(t.value(s)[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("matmul and bias_rows: forward values vs explicit loops") {
  // [DERIVED] 2x3 * 3x2 against a hand-rolled triple loop.
  std::mt19937_64 rng(5);
  auto av = randvec(6, rng), bv = randvec(6, rng);
  Tape t;
  Var c = t.matmul(t.leaf(av, {2, 3}, false), t.leaf(bv, {3, 2}, false));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double expect = 0.0;
      for (int k = 0; k < 3; ++k) expect += av[i * 3 + k] * bv[k * 2 + j];
      CHECK(t.value(c)[i * 2 + j] == doctest::Approx(expect).epsilon(1e-14));
    }
  Var x = t.leaf({1.0, 2.0, 3.0, 4.0}, {2, 2}, false);
  Var biased = t.bias_rows(x, t.leaf({10.0, 20.0}, {2}, false));
  CHECK(t.value(biased) == std::vector<double>{11.0, 12.0, 23.0, 24.0});
}

TEST_CASE("finite-difference gradients: dense primitives") {
  std::mt19937_64 rng(17);
  auto x0 = randvec(6, rng);
  check_gradient(x0, {6}, [](Tape& t, Var x) { return t.sum(t.silu(x)); });
  check_gradient(x0, {6}, [](Tape& t, Var x) { return t.sum(t.mul(x, x)); });
  check_gradient(x0, {6}, [](Tape& t, Var x) { return t.sum(t.scale(x, 3.0)); });
  auto y0 = randvec(6, rng);
  check_gradient(x0, {6}, [&](Tape& t, Var x) {
    return t.sum(t.sub(t.add(x, t.constant(y0, {6})), t.mul(x, t.constant(y0, {6}))));
  });
}

TEST_CASE("finite-difference gradients: matmul, bias, dot") {
  std::mt19937_64 rng(29);
  auto x0 = randvec(6, rng);
  auto other = randvec(6, rng);
  auto weights = randvec(4, rng);
  // Gradient w.r.t. the left operand.
  check_gradient(x0, {2, 3}, [&](Tape& t, Var x) {
    Var b = t.constant(other, {3, 2});
    return t.dot_const(t.matmul(x, b), weights);
  });
  // Gradient w.r.t. the right operand.
  check_gradient(x0, {3, 2}, [&](Tape& t, Var x) {
    Var a = t.constant(other, {2, 3});
    return t.dot_const(t.matmul(a, x), weights);
  });
  auto bias = randvec(2, rng);
  check_gradient(x0, {2, 3}, [&](Tape& t, Var x) {
    return t.sum(t.silu(t.bias_rows(x, t.constant(bias, {2}))));
  });
  check_gradient(bias, {2}, [&](Tape& t, Var b) {
    return t.sum(t.silu(t.bias_rows(t.constant(x0, {2, 3}), b)));
  });
}

TEST_CASE("finite-difference gradients: spherical-harmonic ops") {
  GridSpec g = build_grid(3, 4, 8);
  SphtPlan plan(g);
  std::mt19937_64 rng(41);
  const int C = 2;
  auto field = randvec(static_cast<size_t>(C) * g.npoints(), rng);
  auto coeff = randvec(static_cast<size_t>(C) * 2 * plan.ncoef(), rng);
  auto wspec = randvec(static_cast<size_t>(g.truncation + 1) * C * C * 2, rng);
  auto csum = randvec(static_cast<size_t>(C) * 2 * plan.ncoef(), rng);
  auto gsum = randvec(static_cast<size_t>(C) * g.npoints(), rng);

  check_gradient(field, {C, g.npoints()}, [&](Tape& t, Var x) {
    return t.dot_const(t.sht_forward(x, plan), csum);
  });
  check_gradient(coeff, {C, 2 * plan.ncoef()}, [&](Tape& t, Var x) {
    return t.dot_const(t.sht_inverse(x, plan), gsum);
  });
  check_gradient(coeff, {C, 2 * plan.ncoef()}, [&](Tape& t, Var x) {
    Var w = t.constant(wspec, {static_cast<int>(wspec.size())});
    return t.dot_const(t.spectral_mix(x, w, C, C, plan), csum);
  });
  check_gradient(wspec, {static_cast<int>(wspec.size())}, [&](Tape& t, Var w) {
    Var x = t.constant(coeff, {C, 2 * plan.ncoef()});
    return t.dot_const(t.spectral_mix(x, w, C, C, plan), csum);
  });
}

TEST_CASE("sht nodes invert each other inside the tape") {
  // [DERIVED] tape-level round trip equals the plan-level one.
  GridSpec g = build_grid(5, 6, 12);
  SphtPlan plan(g);
  std::mt19937_64 rng(43);
  SpectralCoeffs c;
  c.truncation = 5;
  c.values = randvec(2 * plan.ncoef(), rng);
  for (int l = 0; l <= 5; ++l) c.values[2 * coeff_index(l, 0, 5) + 1] = 0.0;
  auto field = plan.inverse(c);
  Tape t;
  Var x = t.leaf(field, {1, g.npoints()}, false);
  auto back = t.value(t.sht_inverse(t.sht_forward(x, plan), plan));
  for (size_t i = 0; i < field.size(); ++i)
    CHECK(back[i] == doctest::Approx(field[i]).epsilon(1e-11));
}

TEST_CASE("zonal_log_amplitude: forward matches a direct DFT oracle") {
  // [DERIVED] A_k = sum_i (w_i/2) |F_{i,k}|, value log(A_k + eps).
  GridSpec g = build_grid(3, 4, 8);
  std::mt19937_64 rng(47);
  auto field = randvec(static_cast<size_t>(2) * g.npoints(), rng);
  const double eps = 1e-12;
  Tape t;
  Var v = t.zonal_log_amplitude(t.leaf(field, {2, g.npoints()}, false), g, eps);
  const int nk = g.nlon / 2 + 1;
  REQUIRE(t.shape(v) == std::vector<int>{2, nk});
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < nk; ++k) {
      double amp = 0.0;
      for (int i = 0; i < g.nlat; ++i) {
        double re = 0.0, im = 0.0;
        for (int j = 0; j < g.nlon; ++j) {
          double ph = -2.0 * 3.14159265358979323846 * k * j / g.nlon;
          double f = field[(static_cast<size_t>(c) * g.nlat + i) * g.nlon + j];
          re += f * std::cos(ph);
          im += f * std::sin(ph);
        }
        amp += 0.5 * g.gauss_weights[i] * std::hypot(re, im);
      }
      CHECK(t.value(v)[static_cast<size_t>(c) * nk + k] ==
            doctest::Approx(std::log(amp + eps)).epsilon(1e-12));
    }
}

TEST_CASE("zonal_log_amplitude: finite-difference gradient") {
  GridSpec g = build_grid(3, 4, 8);
  std::mt19937_64 rng(53);
  auto field = randvec(static_cast<size_t>(1) * g.npoints(), rng);
  auto weights = randvec(g.nlon / 2 + 1, rng);
  check_gradient(field, {1, g.npoints()}, [&](Tape& t, Var x) {
    return t.dot_const(t.zonal_log_amplitude(x, g, 1e-12), weights);
  });
}

TEST_CASE("tape rejects non-finite values at node creation") {
  Tape t;
  CHECK_THROWS(t.leaf({1.0, std::nan("")}, {2}, false));
  Var a = t.leaf({1e308}, {1}, true);
  CHECK_THROWS(t.scale(a, 10.0));  // overflow to inf rejected
}

TEST_CASE("backward requires a scalar loss and seeds with 1") {
  Tape t;
  Var x = t.leaf({2.0, 3.0}, {2}, true);
  CHECK_THROWS(t.backward(x));  // non-scalar
  Var loss = t.sum(x);
  t.backward(loss);
  CHECK(t.grad(x) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("grad-disabled tape records values only") {
  Tape t(false);
  Var x = t.leaf({2.0}, {1}, true);
  Var loss = t.sum(t.mul(x, x));
  CHECK(t.value(loss)[0] == doctest::Approx(4.0));
  CHECK_THROWS(t.backward(loss));
}

TEST_CASE("gradient accumulates across reuse of a node") {
  // [DERIVED] d/dx (x*x + 3x) = 2x + 3.
  Tape t;
  Var x = t.leaf({5.0}, {1}, true);
  Var loss = t.sum(t.add(t.mul(x, x), t.scale(x, 3.0)));
  t.backward(loss);
  CHECK(t.grad(x)[0] == doctest::Approx(13.0));
}
