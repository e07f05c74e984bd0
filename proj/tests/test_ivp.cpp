#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "confode/ivp.hpp"

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"

using namespace confode;

TEST_CASE("exponential growth") {
  auto r = solve_ivp([](double, double y) { return y; }, 0.0, 1.0, 1.0);
  REQUIRE(r.completed);
  CHECK(testutil::rel_err(r.points.back().y, std::exp(1.0)) < 1e-8);
}

TEST_CASE("gaussian decay") {
  auto r =
      solve_ivp([](double x, double y) { return -2.0 * x * y; }, 0.0, 1.0, 2.0);
  REQUIRE(r.completed);
  CHECK(testutil::rel_err(r.points.back().y, std::exp(-4.0)) < 1e-7);
}

TEST_CASE("dense output tracks sin through the whole window") {
  auto r = solve_ivp([](double x, double) { return std::cos(x); }, 0.0, 0.0,
                     6.0);
  REQUIRE(r.completed);
  for (double x = 0.1; x < 6.0; x += 0.37) {
    CHECK(std::abs(sample_at(r, x) - std::sin(x)) < 2e-8);
  }
  // mesh points reproduce exactly
  const auto& p = r.points[r.points.size() / 2];
  CHECK(sample_at(r, p.x) == p.y);
}

TEST_CASE("tightening the tolerance tightens the answer") {
  IvpConfig loose, tight;
  loose.rel_tol = 1e-5;
  loose.abs_tol = 1e-7;
  tight.rel_tol = 1e-11;
  tight.abs_tol = 1e-13;
  auto f = [](double x, double y) { return y * std::cos(x); };
  double want = std::exp(std::sin(3.0));
  auto rl = solve_ivp(f, 0.0, 1.0, 3.0, loose);
  auto rt = solve_ivp(f, 0.0, 1.0, 3.0, tight);
  REQUIRE(rl.completed);
  REQUIRE(rt.completed);
  double el = std::abs(rl.points.back().y - want);
  double et = std::abs(rt.points.back().y - want);
  CHECK(et < el);
  CHECK(et < 1e-10);
}

TEST_CASE("backward integration") {
  auto r = solve_ivp([](double x, double) { return 1.0 / x; }, 2.0,
                     std::log(2.0), 0.5);
  REQUIRE(r.completed);
  CHECK(std::abs(r.points.back().y - std::log(0.5)) < 1e-9);
}

TEST_CASE("blow-up stops cleanly before the pole") {
  auto r = solve_ivp([](double, double y) { return y * y; }, 0.0, 1.0, 2.0);
  CHECK_FALSE(r.completed);
  CHECK_FALSE(r.note.empty());
  CHECK(r.points.back().x < 1.01);  // pole at x = 1
}

TEST_CASE("throwing right-hand side stops instead of propagating") {
  auto f = [](double, double y) {
    if (y < 0.0) throw std::runtime_error("domain");
    return -3.0;
  };
  auto r = solve_ivp(f, 0.0, 1.0, 1.0);
  CHECK_FALSE(r.completed);
  CHECK(r.note == "right-hand side stopped being evaluable");
  CHECK(r.points.back().y >= -1e-9);
  CHECK(r.points.back().x > 0.33);
}

TEST_CASE("moderately stiff relaxation") {
  auto f = [](double x, double y) { return -50.0 * (y - std::cos(x)); };
  auto r = solve_ivp(f, 0.0, 0.0, 1.0);
  REQUIRE(r.completed);
  double want = (2500.0 * std::cos(1.0) + 50.0 * std::sin(1.0)) / 2501.0 -
                2500.0 / 2501.0 * std::exp(-50.0);
  CHECK(std::abs(r.points.back().y - want) < 1e-7);
}

TEST_CASE("weighted march matches the closed form of y' = y (order alpha)") {
  for (double alpha : {0.4, 0.75, 1.0}) {
    auto r = solve_ivp_weighted([](double, double y) { return y; }, alpha, 1.0,
                                1.0, 3.0);
    REQUIRE(r.completed);
    double want =
        std::exp((std::pow(3.0, alpha) - 1.0) / alpha);
    CHECK(testutil::rel_err(r.points.back().y, want) < 1e-8);
  }
  CHECK_THROWS_AS(solve_ivp_weighted([](double, double y) { return y; }, 0.5,
                                     -1.0, 1.0, 2.0),
                  std::domain_error);
}

TEST_CASE("level-curve tracking on a circle") {
  auto g = [](double x, double y) { return x * x + y * y; };
  std::vector<double> xs{2.3, 2.8, 3.0, 3.4, 3.9};
  auto ys = implicit_track(g, 3.0, 4.0, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(std::abs(ys[i] - std::sqrt(25.0 - xs[i] * xs[i])) < 1e-8);
  }
}

TEST_CASE("level-curve tracking keeps the level constant") {
  auto g = [](double x, double y) { return x * std::exp(-y) - y * y; };
  std::vector<double> xs{0.6, 0.9, 1.0, 1.5, 2.2, 3.0};
  auto ys = implicit_track(g, 1.0, 1.0, xs);
  double g0 = g(1.0, 1.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(std::abs(g(xs[i], ys[i]) - g0) < 1e-9);
  }
}

TEST_CASE("vertical tangent reports a fold") {
  auto g = [](double x, double y) { return x * x + y * y; };
  std::vector<double> xs{4.5, 4.99, 5.2};
  CHECK_THROWS_AS(implicit_track(g, 3.0, 4.0, xs), std::runtime_error);
}
