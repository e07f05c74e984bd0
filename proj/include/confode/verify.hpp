#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "confode/fixtures.hpp"
#include "confode/ivp.hpp"
#include "confode/solvers.hpp"

namespace confode {

// Sampling density and acceptance thresholds for solution checking.
struct VerifyConfig {
  int samples = 200;
  double residual_tol = 1e-6;
  double drift_tol = 1e-6;
  double gap_tol = 1e-5;
  IvpConfig ivp;
};

// Metrics of one solution measured against its equation.
//   max_residual    largest slope defect along the solution curve
//   constant_drift  largest |invariant - C| along the numeric trajectory
//   oracle_max_gap  largest |y_symbolic - y_numeric| at the sample points
// A metric the call does not measure stays 0.
struct VerifyReport {
  double max_residual = 0.0;
  std::vector<std::pair<double, double>> residual_points;  // (x, defect)
  double constant_drift = 0.0;
  double oracle_max_gap = 0.0;
  bool pass = false;
};

// Slope defect of the solution curve sampled across [x_lo, x_hi]: the
// weighted derivative of the curve minus what the equation demands.
// Explicit solutions are differentiated directly (the constant comes from
// sol.constant_value, or is fitted at start); implicit ones are followed as
// a level curve from start, which must then be given.  Differential-form
// defects are scaled by the dominant coefficient, so near-vertical slopes
// swap the roles of x and y instead of inflating.  weight_center moves the
// weight to (x - weight_center)^(1-alpha) for shift-centered equations.
VerifyReport residual(const OdeProblem& p, const Solution& sol, double x_lo,
                      double x_hi, int samples = 200,
                      std::optional<std::pair<double, double>> start = {},
                      double weight_center = 0.0, double tol = 1e-6);

// The family constant whose curve passes through (x0, y0).  Throws when the
// solution has no value there or the point is off the computed branch.
double fit_constant(const Solution& sol, double x0, double y0);

// Fits the constant at (x0, y0), integrates the equation numerically across
// [x_lo, x_hi] from that point, and fills constant_drift and oracle_max_gap.
VerifyReport cross_check(const OdeProblem& p, const Solution& sol, double x0,
                         double y0, double x_lo, double x_hi,
                         const VerifyConfig& cfg = {});

// One fixture through the whole pipeline.
struct FixtureReport {
  std::string id;
  std::string family;
  SolutionKind kind = SolutionKind::Implicit;
  std::string display;
  double constant = 0.0;
  VerifyReport metrics;
  std::string variant_note;  // which reading of a flagged ambiguity passed
  std::string error;         // pipeline failure; empty on success
  bool pass = false;
};

// classify -> solve -> fit -> residual -> numeric cross-check for one
// problem carrying an initial condition and window.  family picks the class
// to solve ("" takes the classifier's first choice).  Ambiguities inherent
// to the matched family (integration-sign, ln-vs-power, tangent-argument
// slope, weight center) are arbitrated by measuring every reading against
// the numeric trajectory; the note records each reading's metric.
FixtureReport verify_problem(const OdeProblem& p, const std::string& id,
                             const std::string& family = "",
                             const VerifyConfig& cfg = {});

// verify_problem over a fixture, holding it to its own declared family.
FixtureReport verify_fixture(const Fixture& fx, const VerifyConfig& cfg = {});

// Every fixture; failures land in the report instead of throwing.
std::vector<FixtureReport> run_fixture_suite(const VerifyConfig& cfg = {});

// One machine-readable line: id, family, kind, metrics, pass, note.
std::string report_line(const FixtureReport& r);

}  // namespace confode
