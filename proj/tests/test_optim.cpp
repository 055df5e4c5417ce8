#include <doctest.h>

#include <cmath>
#include <span>
#include <vector>

#include "texflow/error.hpp"
#include "texflow/optim.hpp"

#include "test_util.hpp"

using namespace texflow;

TEST_CASE("sgd_step follows p -= lr * g exactly") {
  std::vector<double> p = {1.0};
  std::vector<double> g = {2.0};
  sgd_step(p, g, 0.1);
  CHECK(p[0] == 0.8);
  g[0] = 1.6;
  sgd_step(p, g, 0.1);
  CHECK(p[0] == 0.64);

  std::vector<double> bad = {1.0, 2.0};
  CHECK_THROWS_AS(sgd_step(p, bad, 0.1), ShapeError);
  CHECK_THROWS_AS(sgd_step(p, g, 0.0), ConfigError);
}

TEST_CASE("adam first step moves by ~lr and converges on a quadratic") {
  std::vector<double> p = {5.0};
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.1;
  std::vector<double> g = {3.0};
  adam_step(p, g, st, cfg);
  // Bias correction makes m_hat/sqrt(v_hat) = sign(g) on the first step.
  CHECK(p[0] == doctest::Approx(4.9).epsilon(1e-6));
  CHECK(st.t == 1);

  for (int i = 0; i < 500; ++i) {
    g[0] = 2.0 * p[0];
    adam_step(p, g, st, cfg);
  }
  CHECK(std::abs(p[0]) < 1e-3);
}

TEST_CASE("adam state is tied to one parameter block") {
  std::vector<double> p = {1.0, 2.0};
  std::vector<double> g = {0.1, 0.1};
  AdamState st;
  adam_step(p, g, st, {});
  std::vector<double> other = {1.0};
  std::vector<double> og = {0.1};
  CHECK_THROWS_AS(adam_step(other, og, st, {}), ShapeError);
  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(adam_step(p, g, st, bad), ConfigError);
}

TEST_CASE("adam runs are bitwise reproducible") {
  auto run = [] {
    std::vector<double> p = {0.3, -0.7, 2.0};
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.05;
    for (int i = 0; i < 50; ++i) {
      std::vector<double> g = {2.0 * p[0], std::sin(p[1]), p[2] * p[2]};
      adam_step(p, g, st, cfg);
    }
    return p;
  };
  CHECK(testutil::bits_equal(run(), run()));
}

TEST_CASE("bounded variance reparameterization hits the documented midpoint") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(bound_variance(0.0) == 2.125);  // 0.25 + 3.75/2
  CHECK(bound_variance_grad(0.0) == 0.9375);  // 3.75 * 0.25
  // Stays inside the open interval until the logistic saturates in doubles.
  CHECK(bound_variance(30.0) < 4.0);
  CHECK(bound_variance(-30.0) > 0.25);
  CHECK(bound_variance(1000.0) <= 4.0);
  CHECK(bound_variance(-1000.0) >= 0.25);

  const std::vector<double> raw = {0.0, 1.0, -1.0, 0.5};
  const VarianceMap m = bound_variance_map(raw, 2, 2);
  CHECK(m.height == 2);
  CHECK(m.at(0, 0) == 2.125);
  CHECK(m.at(0, 1) == doctest::Approx(0.25 + 3.75 * logistic(1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(bound_variance_map(raw, 3, 2), ShapeError);
}

TEST_CASE("variance_regularizer value and accumulation") {
  const std::vector<double> raw = {0.0};
  std::vector<double> d(1, 0.0);
  const double r = variance_regularizer(raw, {}, 0.01, d);
  CHECK(r == doctest::Approx(0.01265625).epsilon(1e-15));  // 0.01 * 1.125^2
  const double want_grad = 0.01 * 2.0 * 1.125 * 0.9375;
  CHECK(d[0] == doctest::Approx(want_grad).epsilon(1e-12));
  variance_regularizer(raw, {}, 0.01, d);  // accumulates, does not overwrite
  CHECK(d[0] == doctest::Approx(2.0 * want_grad).epsilon(1e-12));

  std::vector<double> short_d;
  CHECK_THROWS_AS(variance_regularizer(raw, {}, 0.01, short_d), ShapeError);
}

TEST_CASE("fd_check validates its own oracle") {
  auto quad = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const std::vector<double> point = {0.3, -1.2, 0.7};
  const std::vector<double> good = {0.6, -2.4, 1.4};
  CHECK(fd_check(quad, point, good) < 1e-8);
  const std::vector<double> bad = {0.6, -2.4, 2.8};
  CHECK(fd_check(quad, point, bad) > 0.1);

  auto broken = [](std::span<const double>) { return std::nan(""); };
  CHECK_THROWS_AS(fd_check(broken, point, good), NumericError);
}
