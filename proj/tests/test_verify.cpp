#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <iostream>

#include "confode/verify.hpp"
#include "doctest.h"

using namespace confode;

namespace {

Solution solve_fixture(const Fixture& fx) {
  for (const auto& cl : classify(fx.problem))
    if (fx.family == family_name(cl))
      return solve(fx.problem, cl, solver_config_for(fx.problem));
  throw std::runtime_error("no class for " + fx.id);
}

}  // namespace

TEST_CASE("fitting the constant is evaluating the relation") {
  Solution s1 = solve_fixture(fixture("ex1"));
  double y = std::sqrt(2.0 * std::log(2.0));
  CHECK(fit_constant(s1, 0.0, y) == doctest::Approx(0.0).epsilon(1e-12));

  Solution s2 = solve_fixture(fixture("ex2"));
  double a = fit_constant(s2, 1.0, 1.0);
  CHECK(a == doctest::Approx(std::exp(2.0)).epsilon(1e-12));
  CHECK(s2.invariant(1.0, 1.0) == doctest::Approx(a).epsilon(1e-15));
}

TEST_CASE("constant-rate equations fit zero at their anchor") {
  // weighted slope 1.5 everywhere: y = 1.5*x^0.5/0.5 + C = 3*sqrt(x) + C
  Solution s = solve_linear(Expr::constant(0), Expr::constant(1.5), 0.5, {});
  CHECK(s.kind == SolutionKind::Explicit);
  CHECK(fit_constant(s, 1.0, 3.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS(fit_constant(solve_fixture(fixture("ex10")), 1.0, 0.0));
}

TEST_CASE("explicit residual tracks the slope field") {
  Fixture fx = make_fixture("ex2", 0.7);
  Solution s = solve_fixture(fx);
  s.constant_value = 2.0;
  VerifyReport r = residual(fx.problem, s, 0.5, 3.0);
  CHECK(r.pass);
  CHECK(r.max_residual < 1e-8);
  CHECK(r.residual_points.size() >= 150);
}

TEST_CASE("a constant solves the zero equation with residual zero") {
  OdeProblem p = OdeProblem::normal(Expr::constant(0), 0.5);
  Solution s = solve_linear(Expr::constant(0), Expr::constant(0), 0.5, {});
  s.constant_value = 4.2;
  VerifyReport r = residual(p, s, 0.5, 3.0);
  CHECK(r.max_residual == 0.0);
}

TEST_CASE("residual stays small across a wide window for the linear family") {
  Fixture fx = fixture("ex8");
  Solution s = solve_fixture(fx);
  VerifyReport r = residual(fx.problem, s, 0.5, 4.0, 200, {{1.0, 2.0}});
  CHECK(r.pass);
  CHECK(r.max_residual < 1e-7);
}

TEST_CASE("implicit residual follows the level curve") {
  Fixture fx = fixture("ex1");
  Solution s = solve_fixture(fx);
  VerifyReport r = residual(fx.problem, s, 0.5, 3.0, 200, {{1.0, 2.0}});
  CHECK(r.pass);
  CHECK(r.max_residual < 1e-6);
  CHECK_THROWS_AS(residual(fx.problem, s, 0.5, 3.0), std::invalid_argument);
}

TEST_CASE("cross check measures drift and gap against the integrator") {
  Fixture fx = fixture("ex4");
  Solution s = solve_fixture(fx);
  VerifyReport r = cross_check(fx.problem, s, 1.0, *fx.problem.y0, 1.0, 2.0);
  CHECK(r.pass);
  CHECK(r.oracle_max_gap < 1e-5);
  CHECK(r.constant_drift < 1e-6);

  // zero-constant branch, window kept clear of the tangent pole
  double alpha = fx.problem.alpha;
  double sa = std::sqrt(alpha);
  double y00 = sa * std::tan(1.0 / sa) - 1.0;
  VerifyReport r0 = cross_check(fx.problem, s, 1.0, y00, 1.0, 1.1);
  CHECK(r0.oracle_max_gap < 1e-5);
}

TEST_CASE("cross check holds to 1e-6 on the integrating-factor family") {
  Fixture fx = fixture("ex9");
  Solution s = solve_fixture(fx);
  VerifyReport r = cross_check(fx.problem, s, 1.0, *fx.problem.y0, 0.5, 3.0);
  CHECK(r.pass);
  CHECK(r.oracle_max_gap < 1e-6);
}

TEST_CASE("order one reduces to the classical equation") {
  Fixture fx = make_fixture("ex5", 1.0);
  FixtureReport rep = verify_fixture(fx);
  CHECK(rep.error.empty());
  CHECK(rep.pass);
  CHECK(rep.metrics.oracle_max_gap < 1e-6);
  CHECK(rep.variant_note.find("coincide") != std::string::npos);
}

TEST_CASE("the shifted fixture selects the shift-centered weight") {
  FixtureReport rep = verify_fixture(fixture("ex7"));
  CHECK(rep.error.empty());
  CHECK(rep.pass);
  CHECK(rep.constant == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(rep.variant_note.find("weight-center: x = 1 kept") != std::string::npos);
  CHECK(rep.variant_note.find("drifts") != std::string::npos);
}

TEST_CASE("the ray-form fixture keeps the negative integration sign") {
  FixtureReport rep = verify_fixture(fixture("ex6"));
  CHECK(rep.error.empty());
  CHECK(rep.pass);
  CHECK(rep.variant_note.find("sign: kept du integrand") != std::string::npos);
  CHECK(rep.variant_note.find("sign-flipped drifts") != std::string::npos);
}

TEST_CASE("a corrupted invariant fails the cross check") {
  Fixture fx = fixture("ex11");
  Solution s = solve_fixture(fx);
  Solution bad = s;
  bad.invariant = [](double x, double y) { return x * std::exp(-y) - 0.9 * y * y; };
  bad.relation.reset();
  VerifyReport r = cross_check(fx.problem, bad, 1.0, 1.0, 0.5, 3.0);
  CHECK_FALSE(r.pass);
  CHECK(r.constant_drift > 1e-3);
}

TEST_CASE("every fixture passes the full pipeline") {
  for (const auto& rep : run_fixture_suite()) {
    CAPTURE(rep.id);
    CAPTURE(rep.error);
    CAPTURE(rep.variant_note);
    CHECK(rep.error.empty());
    CHECK(rep.pass);
    CHECK(rep.metrics.max_residual <= 1e-6);
    CHECK(rep.metrics.constant_drift <= 1e-6);
    CHECK(rep.metrics.oracle_max_gap <= 1e-5);
    std::cout << report_line(rep) << "\n";
  }
}

TEST_CASE("flagged fixtures report their arbitration outcome") {
  for (const char* id : {"ex4", "ex5", "ex6", "ex7"}) {
    FixtureReport rep = verify_fixture(fixture(id));
    CAPTURE(id);
    CHECK_FALSE(rep.variant_note.empty());
    CHECK(rep.variant_note.find("kept") != std::string::npos);
  }
}
