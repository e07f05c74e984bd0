#pragma once

#include <functional>

namespace confode {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // accumulated error estimate, always >= 0
  bool converged = false;
  int evaluations = 0;
};

// Adaptive Gauss-Kronrod 7/15 on [a, b].  Subintervals are bisected until the
// local error estimate fits within its length-proportional share of the
// requested tolerance or max_depth splits have been spent on that branch.
// Reversed limits negate the value.  The integrand may throw; exceptions
// propagate to the caller.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a,
                              double b, double rel_tol = 1e-10,
                              double abs_tol = 1e-12, int max_depth = 60);

}  // namespace confode
