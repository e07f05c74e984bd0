#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "confode/classify.hpp"
#include "confode/conformable.hpp"
#include "confode/integrate.hpp"

namespace confode {

// How a solution family is represented.
//   Explicit            y(x) in closed form, the constant symbol inside.
//   Implicit            relation(x, y) = C with the relation in closed form.
//   QuadratureImplicit  relation(x, y) = C where evaluating the relation
//                       needs numeric quadrature.
enum class SolutionKind { Explicit, Implicit, QuadratureImplicit };

const char* kind_name(SolutionKind k);

// One change of variables performed on the way to the answer.
struct TraceStep {
  std::string change;
};

struct Solution {
  SolutionKind kind = SolutionKind::Implicit;
  std::string family;  // same tags as family_name()

  // Explicit solutions: y as an expression in x and the constant symbol.
  std::optional<Expr> y_of_x;

  // Closed-form solutions of any kind: an expression whose value is the
  // family constant, i.e. relation(x, y) = C along every solution curve.
  std::optional<Expr> relation;

  // Always present: the constant implied by a point on the curve.  Level
  // sets of this map are the solution family.
  std::function<double(double x, double y)> invariant;

  // Present when y is directly computable from (x, C): explicit solutions
  // and quadrature forms that stay solved for y.
  std::function<double(double x, double c)> explicit_value;

  std::string display;              // rendered equation, e.g. "x*y = C"
  std::string constant_name = "C";  // "A" for exponential-family displays
  std::optional<double> constant_value;  // left unset by the solvers
  std::vector<TraceStep> trace;
};

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// The inputs are outside what the method can handle (parallel lines,
// failed exactness, no matching family).
class UnsupportedForm : public SolverError {
 public:
  using SolverError::SolverError;
};

// The inputs collapse the method's change of variables (identically zero
// denominators and similar).
class DegenerateCase : public SolverError {
 public:
  using SolverError::SolverError;
};

struct SolverConfig {
  FitConfig fit;      // closed-form antiderivative engine knobs
  NumericConfig num;  // quadrature fallback knobs
  double base_x = 1.0;  // lower limits for quadrature-form answers
  double base_y = 1.0;
};

// base_x = max(0.5, x0/2) and base_y = y0 when the problem has an initial
// condition; (1, 1) otherwise.
SolverConfig solver_config_for(const OdeProblem& p);

// x_factor(x) dx + y_factor(y) dy = 0 integrated componentwise:
// the x-part through the weighted-integral engine (the weight cancels), the
// y-part classically.  The relation is scaled so the leading y-term has
// coefficient +1/-1; an all-logarithm relation with near-integer weights is
// exponentiated to a product form; a lone ln|y| inverts to y = A*exp(...).
Solution solve_separable(const Expr& x_factor, const Expr& y_factor, double alpha,
                         const SolverConfig& cfg = {});

// dy/dx^(a) = f(z), z = a*x^alpha + b*y + c.  Reduces to the one-variable
// integral of 1/(a*alpha + b*f(z)) against x^alpha/alpha + C; inverts to an
// explicit y when that integral is an arctangent or a plain multiple of z.
Solution solve_substitution(double a, double b, double c, const Expr& f,
                            double alpha, const SolverConfig& cfg = {});

// M dx^(a) + N dy = 0 with M, N homogeneous of degrees n+1-alpha and n.
// With F(u) = M(1,u), G(u) = N(1,u) and u = y/x the relation is
// ln|x| + integral of G/(F + u*G) du = C; logarithm terms with arguments
// linear in u are folded into powers of linear forms in x and y when the
// weights scale to integers.
Solution solve_homogeneous(double n, const Expr& M, const Expr& N, double alpha,
                           const SolverConfig& cfg = {});

// dy/dx^(a) = x^(1-a) * psi(y/x).  Relation ln|C*x| + integral of
// 1/(u - psi(u)) du = 0; psi(u) = u collapses to the explicit family y = C*x.
Solution solve_psi(const Expr& psi, double alpha, const SolverConfig& cfg = {});

// dy/dx^(a) = -(x-h)^(1-a) * (a1 x + b1 y + c1)/(a2 x + b2 y + c2) with
// (h, k) the intersection of the two lines.  Shifts x = u+h, y = v+k,
// delegates to solve_homogeneous, and substitutes back.
Solution solve_shifted(double a1, double b1, double c1, double a2, double b2,
                       double c2, double alpha, const SolverConfig& cfg = {});

// dy/dx^(a) + P(x) y = Q(x) via the integrating factor exp(IP) where IP is
// the weighted antiderivative of P: y = exp(-IP) * (J + C), J the weighted
// antiderivative of exp(IP)*Q.  Falls back to quadrature from cfg.base_x
// when either antiderivative has no closed form (the result then stays
// solved for y through explicit_value).
Solution solve_linear(const Expr& P, const Expr& Q, double alpha,
                      const SolverConfig& cfg = {});

// dy/dx^(a) + P(x) y = Q(x) y^n, n != 1.  Substitutes z = y^(1-n), solves
// the linear equation z' + (1-n)P z = (1-n)Q, and presents the result as
// y^(1-n) = ... (explicit in y through the power inverse).
Solution solve_bernoulli(const Expr& P, const Expr& Q, double n, double alpha,
                         const SolverConfig& cfg = {});

// M dx^(a) + N dy = 0 with d/dy M = d^(a)/dx N.  Builds the potential
// f(x, y) from the weighted x-integral of M plus the y-integral of the
// remainder, verifying the gradient at probe points before returning;
// falls back to a path integral from (base_x, base_y) when no closed form.
Solution solve_exact(const Expr& M, const Expr& N, double alpha,
                     const SolverConfig& cfg = {});

// Dispatch on a detected class.
Solution solve(const OdeProblem& p, const OdeClass& cls, const SolverConfig& cfg);
Solution solve(const OdeProblem& p, const OdeClass& cls);

// classify() then solve the first family that succeeds.
Solution solve_auto(const OdeProblem& p);

}  // namespace confode
