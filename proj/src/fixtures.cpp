#include "confode/fixtures.hpp"

#include <cmath>
#include <stdexcept>

namespace confode {

namespace {

using E = Expr;

Expr c(double v) { return E::constant(v); }
Expr xpow(double p) { return E::power(E::x(), c(p)); }
Expr e_of(Expr a) { return E::apply(Builtin::Exp, std::move(a)); }

OdeProblem with_meta(OdeProblem p, double x0, double y0, double lo, double hi) {
  p.x0 = x0;
  p.y0 = y0;
  p.window_lo = lo;
  p.window_hi = hi;
  return p;
}

Fixture build(const std::string& id, double a) {
  const Expr X = E::x();
  const Expr Y = E::y();

  if (id == "ex1") {
    Expr rhs = simplify(xpow(1 - a) * e_of(X) / (Y * (c(1) + e_of(X))));
    return {id, with_meta(OdeProblem::normal(rhs, a), 1.0, 2.0, 0.5, 3.0),
            "separable", "y^2 - 2*ln(1+exp(x)) = C", {}, ""};
  }
  if (id == "ex2") {
    Expr rhs = simplify(E::neg(Y));
    return {id, with_meta(OdeProblem::normal(rhs, a), 1.0, 1.0, 0.5, 4.0),
            "separable", "y = A*exp(-x^a/a)", {},
            "also linear; the two paths must agree pointwise"};
  }
  if (id == "ex3") {
    // beta = -a branch of dy/dx^(a) + x^beta y = 0
    Expr rhs = simplify(E::neg(xpow(-a) * Y));
    return {id, with_meta(OdeProblem::normal(rhs, a), 1.0, 1.0, 0.5, 3.0),
            "separable", "x*y = C", {}, "exponent sum beta + a = 0 folds the weight away"};
  }
  if (id == "ex4") {
    Expr rhs = simplify(E::power(xpow(a) + Y, c(2)));
    double y0 = std::sqrt(a) * std::tan(1.0 / std::sqrt(a) - 1.7) - 1.0;
    return {id, with_meta(OdeProblem::normal(rhs, a), 1.0, y0, 1.0, 2.0),
            "substitution", "y = sqrt(a)*tan(x^a/sqrt(a) + C) - x^a",
            {"tan-slope"},
            "tan-argument slope admits a^-1/2 and a^-3/2 readings; the residual "
            "check keeps a^-1/2"};
  }
  if (id == "ex5") {
    Expr M = simplify(xpow(1 - a) * (X + Y));
    Expr N = simplify(E::neg(c(2) * X + c(3) * Y));
    return {id, with_meta(OdeProblem::differential(M, N, a), 1.0, 1.0, 1.0, 3.0),
            "homogeneous", "ln(x) + integral of -(2+3u)/(1-u-3u^2) du = C",
            {"log-form"},
            "the u-equation integrates against ln(x); the x^(a-1)/(a-1) variant "
            "is checked and rejected"};
  }
  if (id == "ex6") {
    Expr rhs = simplify(xpow(1 - a) * (Y / X + X / Y));
    return {id, with_meta(OdeProblem::normal(rhs, a), 1.0, 1.0, 0.7, 3.0),
            "psi-form", "y^2 = x^2*(2*ln(C*x))", {"sign"},
            "the du integrand sign admits two readings; the residual check "
            "keeps the minus branch"};
  }
  if (id == "ex7") {
    Expr rhs = simplify(E::neg(E::power(X - c(1), c(1 - a)) *
                               (c(2) * X - c(3) * Y + c(4)) /
                               (c(3) * X - c(2) * Y + c(1))));
    return {id, with_meta(OdeProblem::normal(rhs, a), 2.0, 2.0, 1.6, 2.8),
            "shifted-homogeneous", "(x+y-3)^5 = C*(y-x-1)", {"weight-center"},
            "the closed form solves the equation whose weight is centered at "
            "the shift point x = 1; the origin-centered reading is measured "
            "and reported"};
  }
  if (id == "ex8") {
    const double m = 1.0;
    Expr rhs = simplify(xpow(m + 1 - a) + c(m + 1 - a) * xpow(m + 1 - 2 * a) - Y);
    double y0 = 2.0;  // A = e^(1/a)
    return {id, with_meta(OdeProblem::normal(rhs, a), 1.0, y0, 0.5, 4.0),
            "linear", "y = x^(m+1-a) + A*exp(-x^a/a)", {}, ""};
  }
  if (id == "ex9") {
    const double m = 1.0;
    const double b = a;  // the beta = alpha specialization
    Expr rhs = simplify(xpow(m) * e_of(E::neg(xpow(a + b) / c(a + b))) -
                        xpow(b) * Y);
    double y0 = std::exp(-1.0 / (a + b)) * (1.0 / (m + a) + 1.0);  // C = 1
    return {id, with_meta(OdeProblem::normal(rhs, a), 1.0, y0, 0.5, 3.0),
            "linear", "y = exp(-x^(2a)/(2a)) * (x^(1+a)/(1+a) + C)", {}, ""};
  }
  if (id == "ex10") {
    const double r = 2.0, n = 2.0;
    Expr rhs = simplify((xpow(r) - c(r / (n - 1)) * xpow(r - a)) *
                            E::power(Y, c(n)) -
                        Y);
    return {id, with_meta(OdeProblem::normal(rhs, a), 1.0, 0.5, 0.5, 2.5),
            "bernoulli", "1/y = x^2 + C*exp(x^a/a)", {}, ""};
  }
  if (id == "ex11") {
    Expr M = simplify(xpow(1 - a) * e_of(E::neg(Y)));
    Expr N = simplify(E::neg(c(2) * Y + X * e_of(E::neg(Y))));
    return {id, with_meta(OdeProblem::differential(M, N, a), 1.0, 1.0, 0.5, 3.0),
            "exact", "x*exp(-y) - y^2 = C", {}, ""};
  }
  throw std::invalid_argument("unknown fixture id: " + id);
}

const char* kIds[] = {"ex1", "ex2", "ex3", "ex4", "ex5", "ex6",
                      "ex7", "ex8", "ex9", "ex10", "ex11"};

}  // namespace

Fixture make_fixture(const std::string& id, double alpha) { return build(id, alpha); }

const std::vector<Fixture>& fixture_suite() {
  static const std::vector<Fixture> suite = [] {
    std::vector<Fixture> v;
    for (const char* id : kIds) v.push_back(build(id, 0.5));
    return v;
  }();
  return suite;
}

const Fixture& fixture(const std::string& id) {
  for (const Fixture& f : fixture_suite())
    if (f.id == id) return f;
  throw std::invalid_argument("unknown fixture id: " + id);
}

}  // namespace confode
