#include "confode/ivp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace confode {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// embedded 4th order weights
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
// continuous-extension weights
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;

struct StageFailure {};

double eval_stage(const std::function<double(double, double)>& f, double x,
                  double y) {
  double v;
  try {
    v = f(x, y);
  } catch (...) {
    throw StageFailure{};
  }
  if (!std::isfinite(v)) throw StageFailure{};
  return v;
}

}  // namespace

IvpResult solve_ivp(const std::function<double(double, double)>& f, double x0,
                    double y0, double x1, const IvpConfig& cfg) {
  IvpResult out;
  const double span = x1 - x0;
  if (span == 0.0) {
    out.points.push_back({x0, y0, 0.0});
    out.completed = true;
    return out;
  }
  const double dir = span > 0 ? 1.0 : -1.0;
  const double hmax = cfg.h_max > 0 ? cfg.h_max : std::abs(span);
  double h = cfg.h_init > 0 ? std::min(cfg.h_init, hmax)
                            : std::min(0.01 * std::abs(span), hmax);

  double x = x0, y = y0;
  double k1;
  try {
    k1 = eval_stage(f, x, y);
  } catch (const StageFailure&) {
    out.note = "right-hand side not evaluable at the initial point";
    return out;
  }
  out.points.push_back({x, y, k1});

  double errold = 1.0;
  for (int step = 0; step < cfg.max_steps; ++step) {
    if (dir * (x - x1) >= 0.0) {
      out.completed = true;
      return out;
    }
    if (dir * (x + dir * h - x1) > 0.0) h = std::abs(x1 - x);
    bool last_possible = std::abs(x1 - x) <= h * (1 + 1e-12);

    double hd = dir * h;
    double ynew, err, k7;
    IvpResult::DenseSpan span_coef{};
    try {
      double k2 = eval_stage(f, x + c2 * hd, y + hd * (a21 * k1));
      double k3 = eval_stage(f, x + c3 * hd, y + hd * (a31 * k1 + a32 * k2));
      double k4 =
          eval_stage(f, x + c4 * hd, y + hd * (a41 * k1 + a42 * k2 + a43 * k3));
      double k5 = eval_stage(
          f, x + c5 * hd,
          y + hd * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      double k6 = eval_stage(
          f, x + hd,
          y + hd * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      ynew = y + hd * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = eval_stage(f, x + hd, ynew);
      double y4 = y + hd * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 +
                            e7 * k7);
      double sk =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y), std::abs(ynew));
      err = std::abs(ynew - y4) / sk;
      double dy = ynew - y;
      span_coef.xa = x;
      span_coef.h = hd;
      span_coef.r1 = y;
      span_coef.r2 = dy;
      span_coef.r3 = hd * k1 - dy;
      span_coef.r4 = dy - hd * k7 - span_coef.r3;
      span_coef.r5 = hd * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 +
                           d7 * k7);
    } catch (const StageFailure&) {
      h *= 0.5;
      if (h < cfg.h_min) {
        out.note = "right-hand side stopped being evaluable";
        return out;
      }
      continue;
    }

    if (err <= 1.0) {
      x = last_possible ? x1 : x + hd;
      y = ynew;
      k1 = k7;  // first-same-as-last
      out.points.push_back({x, y, k7});
      out.dense.push_back(span_coef);
      if (std::abs(y) > cfg.blowup) {
        out.note = "solution magnitude exceeded the blow-up guard";
        return out;
      }
      double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.14) *
                   std::pow(std::max(errold, 1e-10), 0.08);
      fac = std::clamp(fac, 0.2, 5.0);
      h = std::min(h * fac, hmax);
      errold = std::max(err, 1e-10);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < cfg.h_min) {
        out.note = "step size underflow";
        return out;
      }
    }
  }
  out.note = "step budget exhausted";
  return out;
}

IvpResult solve_ivp_weighted(const std::function<double(double, double)>& rhs,
                             double alpha, double x0, double y0, double x1,
                             const IvpConfig& cfg) {
  if (x0 <= 0.0 || x1 <= 0.0)
    throw std::domain_error("weighted march requires positive abscissas");
  auto f = [rhs, alpha](double x, double y) {
    return std::pow(x, alpha - 1.0) * rhs(x, y);
  };
  return solve_ivp(f, x0, y0, x1, cfg);
}

double sample_at(const IvpResult& r, double x) {
  if (r.points.empty()) throw std::runtime_error("empty trajectory");
  const auto& pts = r.points;
  if (pts.size() == 1 || x == pts.front().x) return pts.front().y;
  if (x == pts.back().x) return pts.back().y;
  bool asc = pts.back().x >= pts.front().x;
  double lo = asc ? pts.front().x : pts.back().x;
  double hi = asc ? pts.back().x : pts.front().x;
  if (x < lo - 1e-12 * (1 + std::abs(lo)) ||
      x > hi + 1e-12 * (1 + std::abs(hi)))
    throw std::runtime_error("sample point outside the covered range");
  // binary search for the span containing x
  std::size_t a = 0, b = r.dense.size();
  while (b - a > 1) {
    std::size_t m = (a + b) / 2;
    if (asc ? r.dense[m].xa <= x : r.dense[m].xa >= x)
      a = m;
    else
      b = m;
  }
  const auto& d = r.dense[a];
  double theta = (x - d.xa) / d.h;
  theta = std::clamp(theta, 0.0, 1.0);
  double om = 1.0 - theta;
  return d.r1 + theta * (d.r2 + om * (d.r3 + theta * (d.r4 + om * d.r5)));
}

std::vector<double> sample(const IvpResult& r, const std::vector<double>& xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(sample_at(r, x));
  return out;
}

std::vector<double> implicit_track(
    const std::function<double(double, double)>& g, double x0, double y0,
    const std::vector<double>& xs, const IvpConfig& cfg) {
  const double g0 = g(x0, y0);
  auto gx = [&](double x, double y) {
    double h = 1e-6 * std::max(1.0, std::abs(x));
    return (g(x + h, y) - g(x - h, y)) / (2 * h);
  };
  auto gy = [&](double x, double y) {
    double h = 1e-6 * std::max(1.0, std::abs(y));
    return (g(x, y + h) - g(x, y - h)) / (2 * h);
  };
  auto slope = [&](double x, double y) {
    double dy = gy(x, y);
    double dx = gx(x, y);
    if (std::abs(dy) < 1e-12 * (1.0 + std::abs(dx)))
      throw std::runtime_error("level curve has a vertical tangent");
    return -dx / dy;
  };
  auto polish = [&](double x, double y) {
    for (int it = 0; it < 4; ++it) {
      double gv = g(x, y) - g0;
      double dy = gy(x, y);
      if (std::abs(dy) < 1e-300) break;
      y -= gv / dy;
    }
    return y;
  };

  std::vector<double> out(xs.size());
  double lo = xs.empty() ? x0 : std::min(xs.front(), x0);
  double hi = xs.empty() ? x0 : std::max(xs.back(), x0);
  IvpResult fwd, bwd;
  if (hi > x0) {
    fwd = solve_ivp(slope, x0, y0, hi, cfg);
    if (!fwd.completed)
      throw std::runtime_error("level-curve continuation failed: " + fwd.note);
  }
  if (lo < x0) {
    bwd = solve_ivp(slope, x0, y0, lo, cfg);
    if (!bwd.completed)
      throw std::runtime_error("level-curve continuation failed: " + bwd.note);
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double x = xs[i];
    double y;
    if (x == x0)
      y = y0;
    else if (x > x0)
      y = sample_at(fwd, x);
    else
      y = sample_at(bwd, x);
    out[i] = polish(x, y);
  }
  return out;
}

}  // namespace confode
