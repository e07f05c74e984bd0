#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "confode/quadrature.hpp"

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"

using confode::integrate_adaptive;

TEST_CASE("polynomials integrate to machine precision") {
  auto r = integrate_adaptive([](double x) { return x * x; }, 0.0, 1.0);
  CHECK(r.converged);
  CHECK(testutil::rel_err(r.value, 1.0 / 3.0) < 1e-14);

  auto r2 = integrate_adaptive(
      [](double x) { return 5 * x * x * x * x - 2 * x + 7; }, -2.0, 3.0);
  // antiderivative x^5 - x^2 + 7x
  double expect = (243.0 - 9.0 + 21.0) - (-32.0 - 4.0 - 14.0);
  CHECK(testutil::rel_err(r2.value, expect) < 1e-14);
}

TEST_CASE("classic smooth integrands") {
  auto s = integrate_adaptive([](double x) { return std::sin(x); }, 0.0, M_PI);
  CHECK(testutil::rel_err(s.value, 2.0) < 1e-13);

  auto l = integrate_adaptive([](double x) { return 1.0 / x; }, 1.0, 2.0);
  CHECK(testutil::rel_err(l.value, std::log(2.0)) < 1e-13);

  auto e = integrate_adaptive([](double x) { return std::exp(x); }, 0.0, 1.0);
  CHECK(testutil::rel_err(e.value, std::exp(1.0) - 1.0) < 1e-13);
}

TEST_CASE("sharp peak forces subdivision but converges") {
  const double w = 1e-2;
  auto r = integrate_adaptive(
      [&](double x) { return 1.0 / (x * x + w * w); }, -1.0, 1.0, 1e-12, 1e-14);
  double expect = 2.0 / w * std::atan(1.0 / w);
  CHECK(r.converged);
  CHECK(testutil::rel_err(r.value, expect) < 1e-11);
  CHECK(r.evaluations > 100);
}

TEST_CASE("oscillatory integrand") {
  auto r = integrate_adaptive([](double x) { return std::sin(50.0 * x); }, 0.0,
                              10.0, 1e-12, 1e-14);
  double expect = (1.0 - std::cos(500.0)) / 50.0;
  CHECK(r.converged);
  CHECK(testutil::rel_err(r.value, expect) < 1e-10);
}

TEST_CASE("integrable endpoint singularity x^(-1/2)") {
  auto r = integrate_adaptive([](double x) { return 1.0 / std::sqrt(x); },
                              1e-12, 1.0, 1e-10, 1e-12);
  CHECK(std::abs(r.value - 2.0) < 1e-5);
}

TEST_CASE("reversed limits negate, empty interval is zero") {
  auto fwd = integrate_adaptive([](double x) { return std::cos(x); }, 0.0, 1.0);
  auto rev = integrate_adaptive([](double x) { return std::cos(x); }, 1.0, 0.0);
  CHECK(fwd.value == doctest::Approx(-rev.value).epsilon(1e-15));

  auto zero = integrate_adaptive([](double) { return 42.0; }, 2.0, 2.0);
  CHECK(zero.value == 0.0);
  CHECK(zero.converged);
}

TEST_CASE("error estimate bounds the true error on smooth problems") {
  auto r = integrate_adaptive([](double x) { return std::exp(-x * x); }, 0.0,
                              2.0, 1e-11, 1e-13);
  double expect = 0.8820813907624215;  // sqrt(pi)/2 * erf(2)
  CHECK(r.converged);
  CHECK(std::abs(r.value - expect) <= std::max(r.error * 10, 1e-14));
}
