#pragma once

#include <optional>
#include <vector>

#include "confode/expr.hpp"

namespace confode {

// Probe ladder and acceptance threshold for the fit-based antiderivative
// engines.  Probes that fail to evaluate are skipped; a fit must survive on
// at least min_probes points and every returned antiderivative is verified
// by exact differentiation before it leaves the engine.
struct FitConfig {
  std::vector<double> probes{0.35, 0.55, 0.8, 1.15, 1.5, 1.95, 2.4, 3.0};
  double fit_tol = 1e-8;
  int min_probes = 5;

  static FitConfig around(double center, double radius);
};

// Nearest short rational p/q with q <= max_den when v sits within relative
// tolerance of one; v unchanged otherwise.  For cleaning fitted scalars;
// verification gates decide correctness, never this.
double snap_rational(double v, int max_den = 12, double tol = 1e-9);

// F with dF/dv = f, or nullopt when no supported pattern matches.
// Patterns: polynomials to degree 6, linear-over-quadratic rationals (all
// three discriminant branches), scaled powers c*v^m including the m = -1
// log case, and scaled exponentials c*e^(r v).
std::optional<Expr> classical_antiderivative(const Expr& f, Var v,
                                             const FitConfig& cfg = {});

// F with x^(1-alpha) F'(x) = f(x), or nullopt.  Patterns: sums of
// c * x^m * exp(r x^alpha / alpha) handled by a reduction that telescopes
// across terms sharing the same r (covers plain powers, the ln x case
// m = -alpha, and integrating-factor products), plus K * D'(x)/D(x) shapes
// against denominators harvested from the term itself (yields K ln D).
std::optional<Expr> conformable_antiderivative(const Expr& f, double alpha,
                                               const FitConfig& cfg = {});

// Additive terms of the simplified expression, negations folded into the
// terms themselves.
std::vector<Expr> flatten_sum(const Expr& e);

// Distributes products and quotient numerators over sums so that every
// additive term is a plain multiplicative atom.  The engines run this first;
// it is also useful when splitting an expression into x- and y-factors.
Expr expand_products(const Expr& e);

}  // namespace confode
