#include "confode/conformable.hpp"

#include <cmath>
#include <stdexcept>

#include "confode/quadrature.hpp"

namespace confode {

bool valid_alpha(double alpha) {
  return std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0;
}

void require_alpha(double alpha) {
  if (!valid_alpha(alpha))
    throw std::invalid_argument("order parameter must lie in (0, 1]");
}

double conformable_derivative(const std::function<double(double)>& f,
                              double alpha, double x,
                              const NumericConfig& cfg) {
  require_alpha(alpha);
  double h = cfg.fd_step * std::max(1.0, std::abs(x));
  double fprime = (f(x + h) - f(x - h)) / (2.0 * h);
  return std::pow(x, 1.0 - alpha) * fprime;
}

double conformable_derivative_limit(const std::function<double(double)>& f,
                                    double alpha, double x,
                                    const NumericConfig& cfg) {
  require_alpha(alpha);
  double step = cfg.limit_eps * std::pow(x, 1.0 - alpha);
  return (f(x + step) - f(x - step)) / (2.0 * cfg.limit_eps);
}

Expr conformable_derivative_expr(const Expr& f, double alpha) {
  require_alpha(alpha);
  return conformable_partial_expr(f, Var::X, alpha);
}

double conformable_derivative(const Expr& f, double alpha, double x) {
  return eval_x(conformable_derivative_expr(f, alpha), x);
}

Expr conformable_partial_expr(const Expr& f, Var v, double alpha) {
  require_alpha(alpha);
  Expr classical = diff_classical(f, v);
  if (alpha == 1.0) return simplify(classical);
  Expr weight =
      Expr::power(Expr::var(v), Expr::constant(1.0 - alpha));
  return simplify(weight * classical);
}

double conformable_partial(const Expr& f, Var v, double alpha, double x,
                           double y) {
  return eval_xy(conformable_partial_expr(f, v, alpha), x, y);
}

double conformable_integral(const std::function<double(double)>& f,
                            double alpha, double a, double x,
                            const NumericConfig& cfg) {
  require_alpha(alpha);
  if (a < 0.0 || x < 0.0)
    throw std::domain_error("integral operator requires nonnegative limits");
  if (a == x) return 0.0;
  double inv = 1.0 / alpha;
  auto g = [&](double u) { return f(std::pow(u, inv)) * inv; };
  auto r = integrate_adaptive(g, std::pow(a, alpha), std::pow(x, alpha),
                              cfg.quad_rel_tol, cfg.quad_abs_tol,
                              cfg.max_quad_depth);
  return r.value;
}

double conformable_integral(const Expr& f, double alpha, double a, double x,
                            const NumericConfig& cfg) {
  return conformable_integral([&](double t) { return eval_x(f, t); }, alpha, a,
                              x, cfg);
}

}  // namespace confode
