#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "confode/expr.hpp"

namespace confode {

// A first-order problem of fractional order alpha, in one of two shapes:
//
//   normal form        dy/dx^(a) = rhs(x, y)
//   differential form  M(x, y) dx^(a) + N(x, y) dy = 0
//
// The two are interchangeable through rhs = -M/N (and M = -rhs, N = 1), but
// the original shape is kept because some families are recognized only in
// one of them.
struct OdeProblem {
  double alpha = 1.0;
  std::optional<Expr> rhs;
  std::optional<Expr> M, N;
  std::optional<double> x0, y0;  // initial condition, if any
  std::optional<double> window_lo, window_hi;

  static OdeProblem normal(Expr rhs, double alpha);
  static OdeProblem differential(Expr M, Expr N, double alpha);

  bool is_differential() const { return M.has_value(); }
  Expr normal_rhs() const;  // rhs, or simplify(-M/N)
  Expr diff_M() const;      // M, or simplify(-rhs)
  Expr diff_N() const;      // N, or 1
};

struct ClassifierConfig {
  std::vector<double> lambda_probes{0.5, 2.0, 3.0};
  int point_probes = 25;
  double match_tol = 1e-7;
  double probe_min = 0.1;  // probes keep both coordinates at least this far from 0
};

// Detected families.  Each struct stores enough to rebuild the equation it
// matched, which the classifier checks before reporting it.

// x^(1-a) x_factor(x) dx^(a) + y_factor(y) dy = 0
struct SeparableClass {
  Expr x_factor, y_factor;
};

// dy/dx^(a) = f(z) with z = a x^alpha + b y + c
struct SubstitutionClass {
  double a, b, c;
  Expr f;  // in one variable (written with the y slot)
};

// M homogeneous of degree n+1-alpha, N of degree n; F(u) = M(1,u), G(u) = N(1,u)
struct HomogeneousClass {
  double n;
  Expr F, G;  // in one variable u = y/x (written with the y slot)
};

// dy/dx^(a) = x^(1-a) psi(y/x)
struct PsiClass {
  Expr psi;  // in one variable u = y/x (written with the y slot)
};

// dy/dx^(a) = -(x-h)^(1-a) (a1 x + b1 y + c1)/(a2 x + b2 y + c2),
// (h, k) the intersection of the two lines
struct ShiftedClass {
  double a1, b1, c1;
  double a2, b2, c2;
  double h, k;
};

// dy/dx^(a) + P(x) y = Q(x), with P not identically zero
struct LinearClass {
  Expr P, Q;
};

// dy/dx^(a) + P(x) y = Q(x) y^n, n not in {0, 1}
struct BernoulliClass {
  Expr P, Q;
  double n;
};

// M dx^(a) + N dy = 0 with d/dy M = d^(a)/dx N on the probe grid
struct ExactClass {
  Expr M, N;
};

using OdeClass = std::variant<LinearClass, BernoulliClass, SeparableClass,
                              SubstitutionClass, HomogeneousClass, PsiClass,
                              ShiftedClass, ExactClass>;

// Stable lowercase tag: "linear", "bernoulli", "separable", "substitution",
// "homogeneous", "psi-form", "shifted-homogeneous", "exact".
const char* family_name(const OdeClass& c);

// Families that match the problem, most specific solver preference first:
// linear, bernoulli, separable, substitution, homogeneous, psi-form,
// shifted-homogeneous, exact.  An empty list means no known family.  Probe
// points where the equation fails to evaluate are skipped, so equations with
// restricted domains still classify from the points they do cover.
std::vector<OdeClass> classify(const OdeProblem& p, const ClassifierConfig& cfg = {});

struct ExactnessReport {
  bool exact = false;
  double max_deviation = 0.0;  // largest |d_y M - x^(1-a) d_x N| seen
  double at_x = 0.0, at_y = 0.0;
};

// Tests d/dy M = d^(a)/dx N at probe pairs (relative tolerance
// cfg.match_tol); the report carries the witness deviation and where it
// happened.
ExactnessReport check_exactness(const Expr& M, const Expr& N, double alpha,
                                const ClassifierConfig& cfg = {});

}  // namespace confode
