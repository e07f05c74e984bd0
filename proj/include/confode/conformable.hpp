#pragma once

#include <functional>

#include "confode/expr.hpp"

namespace confode {

// Shared knobs for the numeric kernels.  Defaults are tuned so that the
// verification tolerances downstream (1e-6 residual, 1e-5 oracle gap) have
// two digits of headroom.
struct NumericConfig {
  double limit_eps = 1e-6;   // step of the limit-quotient derivative
  double fd_step = 1e-5;     // classical central-difference step scale
  double quad_rel_tol = 1e-10;
  double quad_abs_tol = 1e-12;
  int max_quad_depth = 60;
};

// The fractional order lives in (0, 1]; 1 recovers the classical calculus.
bool valid_alpha(double alpha);
void require_alpha(double alpha);  // throws std::invalid_argument

// Derivative of order alpha at x > 0.  Working definition (system of record):
//
//   D_alpha f(x) = x^(1-alpha) * f'(x)
//
// The limit form below computes lim_{e->0} [f(x + e x^(1-alpha)) - f(x)] / e
// by a symmetric quotient; the two agree wherever f is differentiable and are
// cross-checked in the tests rather than trusted blindly.
double conformable_derivative(const std::function<double(double)>& f,
                              double alpha, double x,
                              const NumericConfig& cfg = {});
double conformable_derivative_limit(const std::function<double(double)>& f,
                                    double alpha, double x,
                                    const NumericConfig& cfg = {});

// Exact-derivative forms on expressions (classical part is symbolic, only the
// final evaluation is numeric).
Expr conformable_derivative_expr(const Expr& f, double alpha);
double conformable_derivative(const Expr& f, double alpha, double x);

// Partial derivative of order alpha in one variable of f(x, y); the other
// variable is held fixed.  The x-partial carries the x^(1-alpha) weight, the
// y-partial the y^(1-alpha) weight.
Expr conformable_partial_expr(const Expr& f, Var v, double alpha);
double conformable_partial(const Expr& f, Var v, double alpha, double x,
                           double y);

// Integral operator of order alpha with base point a:
//
//   I_alpha f(x) = integral_a^x f(t) t^(alpha-1) dt
//
// evaluated through the substitution u = t^alpha, which removes the weight's
// singularity at t = 0 and is exact for every alpha in (0, 1].
// Requires 0 <= a and 0 <= x.
double conformable_integral(const std::function<double(double)>& f,
                            double alpha, double a, double x,
                            const NumericConfig& cfg = {});
double conformable_integral(const Expr& f, double alpha, double a, double x,
                            const NumericConfig& cfg = {});

}  // namespace confode
