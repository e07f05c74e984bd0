#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "confode/conformable.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"

using namespace confode;

namespace {
const std::vector<double> kAlphas{0.3, 0.5, 0.77, 1.0};
const std::vector<double> kProbes{0.45, 0.8, 1.3, 2.1, 2.9};
}  // namespace

TEST_CASE("order parameter validation") {
  CHECK(valid_alpha(0.5));
  CHECK(valid_alpha(1.0));
  CHECK_FALSE(valid_alpha(0.0));
  CHECK_FALSE(valid_alpha(-0.2));
  CHECK_FALSE(valid_alpha(1.1));
  CHECK_FALSE(valid_alpha(std::nan("")));
  CHECK_THROWS_AS(require_alpha(0.0), std::invalid_argument);
  CHECK_THROWS_AS(conformable_derivative(Expr::x(), 1.5, 1.0),
                  std::invalid_argument);
}

TEST_CASE("power rule: derivative of x^p is p*x^(p-alpha)") {
  for (double alpha : kAlphas) {
    for (double p : {-1.5, -0.5, 0.5, 1.0, 2.0, 3.25}) {
      Expr f = Expr::power(Expr::x(), Expr::constant(p));
      for (double x : kProbes) {
        double got = conformable_derivative(f, alpha, x);
        double want = p * std::pow(x, p - alpha);
        CHECK(testutil::rel_err(got, want) < 1e-13);
      }
    }
  }
}

TEST_CASE("constants are annihilated exactly") {
  for (double alpha : kAlphas) {
    Expr d = conformable_derivative_expr(Expr::constant(7.25), alpha);
    REQUIRE(d.is_constant());
    CHECK(*d.constant_value() == 0.0);
  }
}

TEST_CASE("eigenfunctions of the operator") {
  // d_alpha exp(x^alpha/alpha) = exp(x^alpha/alpha), and the sin/cos pair
  // rotates, exactly as in the classical alpha = 1 case.
  for (double alpha : {0.3, 0.5, 0.77}) {
    Expr carrier = Expr::power(Expr::x(), Expr::constant(alpha)) /
                   Expr::constant(alpha);
    Expr f = Expr::apply(Builtin::Exp, carrier);
    Expr g = Expr::apply(Builtin::Sin, carrier);
    for (double x : kProbes) {
      CHECK(testutil::rel_err(conformable_derivative(f, alpha, x),
                              eval_x(f, x)) < 1e-12);
      CHECK(testutil::rel_err(conformable_derivative(g, alpha, x),
                              std::cos(std::pow(x, alpha) / alpha)) < 1e-12);
    }
  }
}

TEST_CASE("alpha = 1 recovers the classical derivative") {
  testutil::ExprGen gen(911, false);
  for (int i = 0; i < 40; ++i) {
    Expr f = gen.gen(3);
    Expr classical = diff_classical(f, Var::X);
    for (double x : kProbes) {
      double want;
      try {
        want = eval_x(classical, x);
      } catch (const EvalError&) {
        continue;
      }
      CHECK(std::abs(conformable_derivative(f, 1.0, x) - want) <=
            1e-10 * (1.0 + std::abs(want)));
    }
  }
}

TEST_CASE("linearity, product and quotient rules") {
  testutil::ExprGen gen(2024, false);
  for (int i = 0; i < 30; ++i) {
    Expr f = gen.gen(2);
    Expr g = gen.gen(2);
    for (double alpha : {0.5, 0.77}) {
      Expr dsum = conformable_derivative_expr(
          Expr::constant(2.0) * f - Expr::constant(3.0) * g, alpha);
      Expr df = conformable_derivative_expr(f, alpha);
      Expr dg = conformable_derivative_expr(g, alpha);
      Expr dprod = conformable_derivative_expr(f * g, alpha);
      Expr dquot = conformable_derivative_expr(
          f / (Expr::constant(2.0) + Expr::apply(Builtin::Abs, g)), alpha);
      Expr habs = Expr::constant(2.0) + Expr::apply(Builtin::Abs, g);
      for (double x : kProbes) {
        double fv, gv, dfv, dgv;
        try {
          fv = eval_x(f, x);
          gv = eval_x(g, x);
          dfv = eval_x(df, x);
          dgv = eval_x(dg, x);
        } catch (const EvalError&) {
          continue;
        }
        double scale = 1.0 + std::abs(dfv) + std::abs(dgv) + std::abs(fv) +
                       std::abs(gv);
        CHECK(std::abs(eval_x(dsum, x) - (2.0 * dfv - 3.0 * dgv)) <=
              1e-9 * scale);
        CHECK(std::abs(eval_x(dprod, x) - (fv * dgv + gv * dfv)) <=
              1e-9 * scale * (1.0 + std::abs(fv) + std::abs(gv)));
        // quotient rule against (h f' - f h')/h^2 with h smooth and positive
        double hv = eval_x(habs, x);
        double dhv = eval_x(conformable_derivative_expr(habs, alpha), x);
        double want = (hv * dfv - fv * dhv) / (hv * hv);
        CHECK(std::abs(eval_x(dquot, x) - want) <=
              1e-9 * scale * (1.0 + std::abs(want)));
      }
    }
  }
}

TEST_CASE("limit quotient agrees with the weighted-derivative identity") {
  testutil::ExprGen gen(77, false);
  double worst = 0.0;
  for (int i = 0; i < 40; ++i) {
    Expr f = gen.gen(3);
    auto fn = [&](double t) { return eval_x(f, t); };
    for (double alpha : {0.35, 0.5, 0.9, 1.0}) {
      for (double x : kProbes) {
        double id, lim;
        try {
          id = conformable_derivative(f, alpha, x);
          lim = conformable_derivative_limit(fn, alpha, x);
        } catch (const EvalError&) {
          continue;
        }
        double err = std::abs(lim - id) / (1.0 + std::abs(id));
        worst = std::max(worst, err);
      }
    }
  }
  CHECK(worst < 5e-5);
}

TEST_CASE("partials weight their own variable") {
  // f(x,y) = x^2 y^3
  Expr f = Expr::power(Expr::x(), Expr::constant(2.0)) *
           Expr::power(Expr::y(), Expr::constant(3.0));
  double alpha = 0.5;
  for (double x : {0.7, 1.4}) {
    for (double y : {0.6, 2.2}) {
      double px = conformable_partial(f, Var::X, alpha, x, y);
      double py = conformable_partial(f, Var::Y, alpha, x, y);
      CHECK(testutil::rel_err(px, 2.0 * std::pow(x, 2.0 - alpha) *
                                      std::pow(y, 3.0)) < 1e-13);
      CHECK(testutil::rel_err(py, 3.0 * std::pow(x, 2.0) *
                                      std::pow(y, 3.0 - alpha)) < 1e-13);
    }
  }
}

TEST_CASE("integral operator: closed forms") {
  // I_alpha of t^(m) from a to x is (x^(m+alpha) - a^(m+alpha))/(m+alpha).
  for (double alpha : kAlphas) {
    for (double m : {0.0, 1.0, 2.5, -0.25}) {
      Expr f = Expr::power(Expr::x(), Expr::constant(m));
      double a = 0.5, x = 2.4;
      double got = conformable_integral(f, alpha, a, x);
      double q = m + alpha;
      double want = (std::pow(x, q) - std::pow(a, q)) / q;
      CHECK(testutil::rel_err(got, want) < 1e-11);
    }
  }
  // the weight exponent itself: I_alpha of t^(-alpha) is ln(x/a)
  for (double alpha : {0.4, 1.0}) {
    Expr f = Expr::power(Expr::x(), Expr::constant(-alpha));
    double got = conformable_integral(f, alpha, 0.5, 2.4);
    CHECK(testutil::rel_err(got, std::log(2.4 / 0.5)) < 1e-11);
  }
}

TEST_CASE("integral from zero stays finite for alpha < 1") {
  double got = conformable_integral([](double) { return 1.0; }, 0.5, 0.0, 4.0);
  CHECK(testutil::rel_err(got, 4.0) < 1e-10);  // x^alpha/alpha = 2*sqrt(4)
  CHECK_THROWS_AS(
      conformable_integral([](double) { return 1.0; }, 0.5, -1.0, 1.0),
      std::domain_error);
}

TEST_CASE("fundamental theorem both directions") {
  testutil::ExprGen gen(31337, false);
  NumericConfig tight;
  tight.quad_rel_tol = 1e-12;
  tight.quad_abs_tol = 1e-14;
  int checked = 0;
  for (int i = 0; i < 20 && checked < 12; ++i) {
    Expr f = gen.gen(2);
    const double a = 0.6;
    bool ok = true;
    for (double x : {0.9, 1.7, 2.6}) {
      try {
        eval_x(f, x);
      } catch (const EvalError&) {
        ok = false;
      }
    }
    if (!ok) continue;
    ++checked;
    for (double alpha : {0.5, 0.85}) {
      Expr df = conformable_derivative_expr(f, alpha);
      for (double x : {0.9, 1.7, 2.6}) {
        // integral of the derivative recovers the increment
        double inc = conformable_integral(df, alpha, a, x, tight);
        double want = eval_x(f, x) - eval_x(f, a);
        CHECK(std::abs(inc - want) <= 1e-8 * (1.0 + std::abs(want)));
        // derivative of the integral recovers the integrand
        auto F = [&](double t) {
          return conformable_integral(f, alpha, a, t, tight);
        };
        NumericConfig fd;
        fd.fd_step = 1e-4;
        double back = conformable_derivative(F, alpha, x, fd);
        double fx = eval_x(f, x);
        CHECK(std::abs(back - fx) <= 2e-5 * (1.0 + std::abs(fx)));
      }
    }
  }
  CHECK(checked >= 12);
}
