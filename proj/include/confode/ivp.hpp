#pragma once

#include <functional>
#include <string>
#include <vector>

namespace confode {

struct IvpConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double h_init = 0.0;  // 0 picks 1% of the span
  double h_min = 1e-14;
  double h_max = 0.0;  // 0 means the whole span
  int max_steps = 200000;
  double blowup = 1e8;  // |y| beyond this stops the march
};

struct IvpPoint {
  double x, y, yprime;
};

// Accepted mesh of one scalar initial value problem, both endpoints included
// when the march completes.  note explains an early stop; empty otherwise.
// Each accepted step also records the coefficients of the method's quartic
// continuous extension, which is what sample_at interpolates with.
struct IvpResult {
  struct DenseSpan {
    double xa, h;  // interval [xa, xa + h] (h signed)
    double r1, r2, r3, r4, r5;
  };
  std::vector<IvpPoint> points;
  std::vector<DenseSpan> dense;
  bool completed = false;
  std::string note;
};

// Explicit Runge-Kutta 5(4) with error-based step control.  Integrates
// y' = f(x, y) from (x0, y0) to x1 in either direction.  Stage evaluations
// may throw; a throwing stage rejects the step and retries smaller, so the
// march stops cleanly at domain boundaries instead of propagating.
IvpResult solve_ivp(const std::function<double(double, double)>& f, double x0,
                    double y0, double x1, const IvpConfig& cfg = {});

// Same, for equations given through the weighted derivative of order alpha:
// solves y' = x^(alpha-1) rhs(x, y).  Requires x0, x1 > 0.
IvpResult solve_ivp_weighted(const std::function<double(double, double)>& rhs,
                             double alpha, double x0, double y0, double x1,
                             const IvpConfig& cfg = {});

// Evaluates the continuous extension of the accepted step covering x.  x must
// lie inside the covered range.
double sample_at(const IvpResult& r, double x);
std::vector<double> sample(const IvpResult& r, const std::vector<double>& xs);

// Follows the level curve g(x, y) = g(x0, y0) from (x0, y0) across the sorted
// abscissas xs (which may lie on both sides of x0), by continuation along
// dy/dx = -g_x/g_y with a Newton polish at every requested point.  Throws
// std::runtime_error when the curve cannot be followed (fold, divergence).
std::vector<double> implicit_track(
    const std::function<double(double, double)>& g, double x0, double y0,
    const std::vector<double>& xs, const IvpConfig& cfg = {});

}  // namespace confode
