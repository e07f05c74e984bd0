#include "confode/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "confode/conformable.hpp"

namespace confode {

double snap_rational(double v, int max_den, double tol) {
  if (!std::isfinite(v)) return v;
  for (int q = 1; q <= max_den; ++q) {
    double scaled = v * q;
    double r = std::round(scaled);
    if (std::abs(scaled - r) <= tol * std::max(1.0, std::abs(scaled)))
      return r / q;
  }
  return v;
}

namespace {

// ---------------------------------------------------------------------------
// Small dense least squares (normal equations, partial pivoting).  Systems
// here are at most 5x5 and the probe ladders keep them well conditioned.
// ---------------------------------------------------------------------------

bool solve_lls(const std::vector<std::vector<double>>& rows,
               const std::vector<double>& rhs, std::vector<double>& out) {
  const std::size_t n = rows.empty() ? 0 : rows.front().size();
  if (n == 0 || rows.size() < n) return false;
  std::vector<std::vector<double>> m(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) m[i][j] += rows[r][i] * rows[r][j];
      m[i][n] += rows[r][i] * rhs[r];
    }
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-13) return false;
    std::swap(m[piv], m[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double k = m[r][col] / m[col][col];
      for (std::size_t j = col; j <= n; ++j) m[r][j] -= k * m[col][j];
    }
  }
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = m[i][n] / m[i][i];
  return true;
}

// Round fitted scalars to short rationals when they are within fitting noise
// of one; purely cosmetic, the verification gate decides correctness.
double snap_scalar(double v) {
  if (!std::isfinite(v)) return v;
  for (double d : {1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 10.0}) {
    double scaled = v * d;
    double r = std::round(scaled);
    if (std::abs(scaled - r) <= 1e-9 * std::max(1.0, std::abs(scaled)))
      return r / d;
  }
  return v;
}

struct Samples {
  std::vector<double> v;  // probe positions that evaluated cleanly
  std::vector<double> t;  // term values there
};

Samples collect(const Expr& term, Var var, const std::vector<double>& probes) {
  Samples s;
  for (double p : probes) {
    double x = var == Var::X ? p : 1.0;
    double y = var == Var::Y ? p : 1.0;
    try {
      double val = eval_xy(term, x, y);
      if (!std::isfinite(val)) continue;
      s.v.push_back(p);
      s.t.push_back(val);
    } catch (const EvalError&) {
    }
  }
  return s;
}

bool same_sign(const std::vector<double>& t) {
  bool pos = false, neg = false;
  for (double x : t) {
    if (x > 0) pos = true;
    if (x < 0) neg = true;
    if (x == 0) return false;
  }
  return pos != neg;
}

Expr var_expr(Var v) { return Expr::var(v); }

Expr ln_of(const Expr& arg, bool needs_abs) {
  return Expr::apply(Builtin::Ln,
                     needs_abs ? Expr::apply(Builtin::Abs, arg) : arg);
}

// ---------------------------------------------------------------------------
// Classical patterns
// ---------------------------------------------------------------------------

std::optional<Expr> poly_fit(const Samples& s, Var var) {
  double scale = 0.0;
  for (double t : s.t) scale = std::max(scale, std::abs(t));
  if (scale == 0.0) return Expr::constant(0.0);
  int max_deg = std::min<int>(6, static_cast<int>(s.v.size()) - 2);
  for (int deg = 0; deg <= max_deg; ++deg) {
    std::vector<std::vector<double>> rows;
    for (double u : s.v) {
      std::vector<double> row(deg + 1);
      double p = 1.0;
      for (int k = 0; k <= deg; ++k, p *= u) row[k] = p;
      rows.push_back(std::move(row));
    }
    std::vector<double> coef;
    if (!solve_lls(rows, s.t, coef)) continue;
    double worst = 0.0;
    for (std::size_t i = 0; i < s.v.size(); ++i) {
      double fit = 0.0, p = 1.0;
      for (int k = 0; k <= deg; ++k, p *= s.v[i]) fit += coef[k] * p;
      worst = std::max(worst, std::abs(fit - s.t[i]));
    }
    if (worst > 1e-10 * scale) continue;
    std::vector<Expr> terms;
    for (int k = 0; k <= deg; ++k) {
      double c = snap_scalar(coef[k]) / (k + 1);
      if (std::abs(c) <= 1e-11 * scale) continue;
      Expr mono = k == 0 ? var_expr(var)
                         : Expr::power(var_expr(var), Expr::constant(k + 1.0));
      terms.push_back(Expr::constant(c) * mono);
    }
    if (terms.empty()) return Expr::constant(0.0);
    return simplify(Expr::sum(std::move(terms)));
  }
  return std::nullopt;
}

// t = (p u + q) / (a u^2 + b u + c), coefficients recovered up to scale by
// fixing one of a, b, c to 1 and solving the rest in least squares.
std::optional<Expr> rational_fit(const Samples& s, Var var) {
  if (s.v.size() < 6) return std::nullopt;
  // Normalizations tried in order: pure linear denominator b=1 (a=0), then
  // quadratic with c=1, a=1, b=1 fixed.  The linear pass comes first because
  // a degree-1 target makes every quadratic normalization rank deficient.
  for (int fixed = -1; fixed < 3; ++fixed) {
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    for (std::size_t i = 0; i < s.v.size(); ++i) {
      double u = s.v[i], t = s.t[i];
      double cols[3] = {t * u * u, t * u, t};  // a, b, c columns
      std::vector<double> row;
      if (fixed < 0) {
        row = {cols[2], -u, -1.0};  // unknowns c, p, q with a = 0, b = 1
        rhs.push_back(-cols[1]);
      } else {
        // skip the fixed column, move it to the rhs
        double fixed_col =
            fixed == 0 ? cols[2] : (fixed == 1 ? cols[0] : cols[1]);
        for (int j = 0; j < 3; ++j)
          if (j != (fixed == 0 ? 2 : (fixed == 1 ? 0 : 1)))
            row.push_back(cols[j]);
        row.push_back(-u);
        row.push_back(-1.0);
        rhs.push_back(-fixed_col);
      }
      rows.push_back(std::move(row));
    }
    std::vector<double> w;
    if (!solve_lls(rows, rhs, w)) continue;
    double a, b, c, p, q;
    if (fixed < 0) {
      a = 0.0, b = 1.0, c = w[0], p = w[1], q = w[2];
    } else if (fixed == 0) {
      a = w[0], b = w[1], c = 1.0, p = w[2], q = w[3];
    } else if (fixed == 1) {
      a = 1.0, b = w[0], c = w[1], p = w[2], q = w[3];
    } else {
      a = w[0], b = 1.0, c = w[1], p = w[2], q = w[3];
    }
    double dscale = std::max({std::abs(a), std::abs(b), std::abs(c)});
    if (dscale == 0.0) continue;
    a = snap_scalar(a);
    b = snap_scalar(b);
    c = snap_scalar(c);
    p = snap_scalar(p);
    q = snap_scalar(q);
    bool ok = true;
    bool den_positive = true;
    for (std::size_t i = 0; i < s.v.size() && ok; ++i) {
      double u = s.v[i];
      double den = (a * u + b) * u + c;
      if (std::abs(den) <= 1e-9 * dscale * std::max(1.0, u * u)) ok = false;
      if (den < 0) den_positive = false;
      double fit = (p * u + q) / den;
      if (std::abs(fit - s.t[i]) > 1e-8 * (1.0 + std::abs(s.t[i]))) ok = false;
    }
    if (!ok) continue;

    Expr u = var_expr(var);
    std::vector<Expr> parts;
    if (std::abs(a) <= 1e-9 * dscale) {
      if (std::abs(b) <= 1e-9 * dscale) continue;  // constant den: poly case
      // (p u + q)/(b u + c) = p/b + (q b - p c)/b^2 * 1/(b u + c)
      double lin = snap_scalar(p / b);
      double logc = snap_scalar((q * b - p * c) / (b * b));
      if (std::abs(lin) > 0)
        parts.push_back(Expr::constant(snap_scalar(lin)) * u);
      if (std::abs(logc) > 0)
        parts.push_back(
            Expr::constant(snap_scalar(logc)) *
            ln_of(Expr::constant(b) * u + Expr::constant(c), !den_positive));
    } else {
      double A = b / a, B = c / a;  // u^2 + A u + B
      double P = p / a, Q = q / a;
      Expr den_poly = Expr::power(u, Expr::constant(2.0)) +
                      Expr::constant(A) * u + Expr::constant(B);
      double disc = A * A - 4.0 * B;
      double dtol = 1e-9 * std::max({A * A, std::abs(B), 1.0});
      P = snap_scalar(P);
      // the normalized quadratic is positive everywhere iff disc < 0
      if (std::abs(P) > 0)
        parts.push_back(Expr::constant(snap_scalar(P / 2.0)) *
                        ln_of(den_poly, disc >= -dtol));
      double R = snap_scalar(Q - P * A / 2.0);  // coefficient on 1/(u^2+Au+B)
      if (std::abs(R) > 0) {
        Expr shifted = Expr::constant(2.0) * u + Expr::constant(A);
        if (disc < -dtol) {
          double root = std::sqrt(-disc);
          parts.push_back(
              Expr::constant(snap_scalar(2.0 * R / root)) *
              Expr::apply(Builtin::Arctan, shifted / Expr::constant(root)));
        } else if (disc > dtol) {
          double root = std::sqrt(disc);
          parts.push_back(
              Expr::constant(snap_scalar(R / root)) *
              ln_of((shifted - Expr::constant(root)) /
                        (shifted + Expr::constant(root)),
                    true));
        } else {
          parts.push_back(Expr::constant(snap_scalar(-2.0 * R)) / shifted);
        }
      }
      if (parts.empty()) return Expr::constant(0.0);
    }
    return simplify(Expr::sum(std::move(parts)));
  }
  return std::nullopt;
}

std::optional<Expr> power_fit(const Samples& s, Var var) {
  if (!same_sign(s.t)) return std::nullopt;
  for (double u : s.v)
    if (u <= 0.0) return std::nullopt;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    rows.push_back({1.0, std::log(s.v[i])});
    rhs.push_back(std::log(std::abs(s.t[i])));
  }
  std::vector<double> w;
  if (!solve_lls(rows, rhs, w)) return std::nullopt;
  double c = (s.t[0] > 0 ? 1.0 : -1.0) * std::exp(w[0]);
  double m = snap_scalar(w[1]);
  c = snap_scalar(c);
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    double fit = c * std::pow(s.v[i], m);
    if (std::abs(fit - s.t[i]) > 1e-9 * std::abs(s.t[i])) return std::nullopt;
  }
  Expr u = var_expr(var);
  if (std::abs(m + 1.0) <= 1e-9)
    return simplify(Expr::constant(c) * Expr::apply(Builtin::Ln, u));
  return simplify(Expr::constant(snap_scalar(c / (m + 1.0))) *
                  Expr::power(u, Expr::constant(m + 1.0)));
}

std::optional<Expr> exp_fit(const Samples& s, Var var) {
  if (!same_sign(s.t)) return std::nullopt;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    rows.push_back({1.0, s.v[i]});
    rhs.push_back(std::log(std::abs(s.t[i])));
  }
  std::vector<double> w;
  if (!solve_lls(rows, rhs, w)) return std::nullopt;
  double c = (s.t[0] > 0 ? 1.0 : -1.0) * std::exp(w[0]);
  double r = snap_scalar(w[1]);
  if (std::abs(r) <= 1e-12) return std::nullopt;  // constant: poly handles it
  c = snap_scalar(c);
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    double fit = c * std::exp(r * s.v[i]);
    if (std::abs(fit - s.t[i]) > 1e-9 * std::abs(s.t[i])) return std::nullopt;
  }
  Expr u = var_expr(var);
  return simplify(Expr::constant(snap_scalar(c / r)) *
                  Expr::apply(Builtin::Exp, Expr::constant(r) * u));
}

bool verify_derivative(const Expr& F, const Expr& f, Var var,
                       const std::vector<double>& probes, double tol,
                       double weight_alpha) {
  Expr dF = weight_alpha == 1.0
                ? simplify(diff_classical(F, var))
                : conformable_partial_expr(F, var, weight_alpha);
  int checked = 0;
  for (double p : probes) {
    double x = var == Var::X ? p : 1.0;
    double y = var == Var::Y ? p : 1.0;
    try {
      double want = eval_xy(f, x, y);
      double got = eval_xy(dF, x, y);
      if (std::abs(got - want) > tol * (1.0 + std::abs(want))) return false;
      ++checked;
    } catch (const EvalError&) {
    }
  }
  return checked >= 3;
}

// ---------------------------------------------------------------------------
// Conformable engine pieces
// ---------------------------------------------------------------------------

struct PowerExpTerm {
  double c, m, r;
};

std::optional<PowerExpTerm> power_exp_fit(const Samples& s, double alpha) {
  if (s.v.size() < 5 || !same_sign(s.t)) return std::nullopt;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    rows.push_back(
        {1.0, std::log(s.v[i]), std::pow(s.v[i], alpha) / alpha});
    rhs.push_back(std::log(std::abs(s.t[i])));
  }
  std::vector<double> w;
  if (!solve_lls(rows, rhs, w)) return std::nullopt;
  PowerExpTerm out;
  out.c = snap_scalar((s.t[0] > 0 ? 1.0 : -1.0) * std::exp(w[0]));
  out.m = snap_scalar(w[1]);
  out.r = snap_scalar(w[2]);
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    double fit = out.c * std::pow(s.v[i], out.m) *
                 std::exp(out.r * std::pow(s.v[i], alpha) / alpha);
    if (std::abs(fit - s.t[i]) > 1e-9 * std::abs(s.t[i])) return std::nullopt;
  }
  return out;
}

void harvest_denominators(const Expr& e, std::vector<Expr>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, QuotientNode>) {
          if (!n.den->is_constant()) out.push_back(*n.den);
          harvest_denominators(*n.num, out);
          harvest_denominators(*n.den, out);
        } else if constexpr (std::is_same_v<T, PowerNode>) {
          if (auto c = n.exponent->constant_value(); c && *c < 0.0)
            out.push_back(*n.base);
          harvest_denominators(*n.base, out);
        } else if constexpr (std::is_same_v<T, SumNode>) {
          for (const auto& t : n.terms) harvest_denominators(t, out);
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          for (const auto& t : n.factors) harvest_denominators(t, out);
        } else if constexpr (std::is_same_v<T, NegNode>) {
          harvest_denominators(*n.arg, out);
        } else if constexpr (std::is_same_v<T, ApplyNode>) {
          harvest_denominators(*n.arg, out);
        }
      },
      e.node());
}

std::optional<Expr> log_derivative_fit(const Expr& term, const Samples& s,
                                       double alpha) {
  std::vector<Expr> cands;
  harvest_denominators(term, cands);
  for (const Expr& d : cands) {
    if (d.depends_on(Var::Y) || d.has_constant_symbol()) continue;
    Expr dd = simplify(diff_classical(d, Var::X));
    double kbar = 0.0;
    bool ok = true;
    bool positive = true;
    std::vector<double> ks;
    for (std::size_t i = 0; i < s.v.size() && ok; ++i) {
      double x = s.v[i];
      try {
        double dv = eval_x(d, x);
        double dpv = eval_x(dd, x);
        if (dv <= 0.0) positive = false;
        if (std::abs(dpv) < 1e-300 || dv == 0.0) {
          ok = false;
          break;
        }
        ks.push_back(s.t[i] * std::pow(x, alpha - 1.0) * dv / dpv);
      } catch (const EvalError&) {
        ok = false;
      }
    }
    if (!ok || ks.size() < 4) continue;
    kbar = ks[0];
    for (double k : ks)
      if (std::abs(k - kbar) > 1e-8 * (1.0 + std::abs(kbar))) ok = false;
    if (!ok) continue;
    return simplify(Expr::constant(snap_scalar(kbar)) * ln_of(d, !positive));
  }
  return std::nullopt;
}

Expr power_exp_part(double coeff, double m, double r, double alpha) {
  Expr x = Expr::x();
  std::vector<Expr> factors;
  factors.push_back(Expr::constant(coeff));
  if (std::abs(m - 1.0) <= 1e-12)
    factors.push_back(x);
  else if (std::abs(m) > 1e-12)
    factors.push_back(Expr::power(x, Expr::constant(m)));
  factors.push_back(Expr::apply(
      Builtin::Exp, Expr::constant(r) *
                        Expr::power(x, Expr::constant(alpha)) /
                        Expr::constant(alpha)));
  return Expr::product(std::move(factors));
}

}  // namespace

FitConfig FitConfig::around(double center, double radius) {
  FitConfig cfg;
  cfg.probes.clear();
  for (int i = -4; i <= 4; ++i)
    cfg.probes.push_back(center + radius * i / 4.0);
  return cfg;
}

std::vector<Expr> flatten_sum(const Expr& e) {
  std::vector<Expr> out;
  std::function<void(const Expr&, bool)> walk = [&](const Expr& t, bool neg) {
    if (auto* s = std::get_if<SumNode>(&t.node())) {
      for (const auto& u : s->terms) walk(u, neg);
    } else if (auto* g = std::get_if<NegNode>(&t.node())) {
      walk(*g->arg, !neg);
    } else {
      out.push_back(neg ? Expr::neg(t) : t);
    }
  };
  walk(simplify(e), false);
  return out;
}

Expr expand_products(const Expr& e0) {
  using E = Expr;
  Expr e = simplify(e0);
  std::function<Expr(const Expr&)> go = [&](const Expr& node) -> Expr {
    return std::visit(
        [&](const auto& n) -> Expr {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SumNode>) {
            std::vector<Expr> ts;
            ts.reserve(n.terms.size());
            for (const auto& t : n.terms) ts.push_back(go(t));
            return E::sum(std::move(ts));
          } else if constexpr (std::is_same_v<T, NegNode>) {
            return E::neg(go(*n.arg));
          } else if constexpr (std::is_same_v<T, ProductNode>) {
            std::vector<Expr> fs;
            fs.reserve(n.factors.size());
            for (const auto& f : n.factors) fs.push_back(go(f));
            for (std::size_t i = 0; i < fs.size(); ++i) {
              const Expr* inner = &fs[i];
              bool negd = false;
              if (auto* g = std::get_if<NegNode>(&inner->node())) {
                inner = g->arg.get();
                negd = true;
              }
              if (auto* s = std::get_if<SumNode>(&inner->node())) {
                std::vector<Expr> terms;
                for (const auto& t : s->terms) {
                  std::vector<Expr> rest = fs;
                  rest[i] = negd ? E::neg(t) : t;
                  terms.push_back(go(E::product(std::move(rest))));
                }
                return E::sum(std::move(terms));
              }
            }
            return E::product(std::move(fs));
          } else if constexpr (std::is_same_v<T, QuotientNode>) {
            Expr num = go(*n.num);
            Expr den = go(*n.den);
            if (auto* s = std::get_if<SumNode>(&num.node())) {
              std::vector<Expr> terms;
              for (const auto& t : s->terms)
                terms.push_back(go(E::quotient(t, den)));
              return E::sum(std::move(terms));
            }
            return E::quotient(num, den);
          } else if constexpr (std::is_same_v<T, PowerNode>) {
            return E::power(go(*n.base), go(*n.exponent));
          } else if constexpr (std::is_same_v<T, ApplyNode>) {
            return E::apply(n.fn, go(*n.arg));
          } else {
            return node;
          }
        },
        node.node());
  };
  return go(e);
}

std::optional<Expr> classical_antiderivative(const Expr& f, Var v,
                                             const FitConfig& cfg) {
  Var other = v == Var::X ? Var::Y : Var::X;
  if (f.depends_on(other) || f.has_constant_symbol()) return std::nullopt;
  if (auto c = simplify(f).constant_value(); c && *c == 0.0) return Expr::constant(0);
  std::vector<Expr> parts;
  for (const Expr& term : flatten_sum(expand_products(f))) {
    Samples s = collect(term, v, cfg.probes);
    if (static_cast<int>(s.v.size()) < cfg.min_probes) return std::nullopt;
    std::optional<Expr> F = poly_fit(s, v);
    if (!F) F = rational_fit(s, v);
    if (!F) F = power_fit(s, v);
    if (!F) F = exp_fit(s, v);
    if (!F) return std::nullopt;
    parts.push_back(*F);
  }
  Expr F = simplify(Expr::sum(std::move(parts)));
  if (!verify_derivative(F, f, v, cfg.probes, cfg.fit_tol, 1.0))
    return std::nullopt;
  return F;
}

std::optional<Expr> conformable_antiderivative(const Expr& f, double alpha,
                                               const FitConfig& cfg) {
  require_alpha(alpha);
  if (f.depends_on(Var::Y) || f.has_constant_symbol()) return std::nullopt;
  if (auto c = simplify(f).constant_value(); c && *c == 0.0) return Expr::constant(0);

  struct Group {
    double r;
    std::vector<PowerExpTerm> terms;
  };
  std::vector<Group> groups;
  std::vector<Expr> parts;

  for (const Expr& term : flatten_sum(expand_products(f))) {
    Samples s = collect(term, Var::X, cfg.probes);
    if (static_cast<int>(s.v.size()) < cfg.min_probes) return std::nullopt;
    if (auto pe = power_exp_fit(s, alpha)) {
      bool merged = false;
      for (auto& g : groups) {
        if (std::abs(g.r - pe->r) <= 1e-9 * std::max(1.0, std::abs(g.r))) {
          g.terms.push_back(*pe);
          merged = true;
          break;
        }
      }
      if (!merged) groups.push_back({pe->r, {*pe}});
      continue;
    }
    if (auto lg = log_derivative_fit(term, s, alpha)) {
      parts.push_back(*lg);
      continue;
    }
    return std::nullopt;
  }

  for (auto& g : groups) {
    if (std::abs(g.r) <= 1e-12) {
      for (const auto& t : g.terms) {
        double q = t.m + alpha;
        if (std::abs(q) <= 1e-9) {
          parts.push_back(Expr::constant(t.c) *
                          Expr::apply(Builtin::Ln, Expr::x()));
        } else {
          Expr mono = std::abs(q - 1.0) <= 1e-12
                          ? Expr::x()
                          : Expr::power(Expr::x(), Expr::constant(q));
          parts.push_back(Expr::constant(snap_scalar(t.c / q)) * mono);
        }
      }
      continue;
    }
    // Reduction: the image of x^m e^(r x^alpha/alpha) under the weighted
    // derivative is r x^m e + m x^(m-alpha) e, so emitting (c/r) x^m e
    // leaves a correction at power m - alpha.  Corrections telescope against
    // sibling terms that share r (integrating-factor products cancel here).
    struct Pending {
      double m, c;
    };
    std::vector<Pending> pend;
    double scale = 0.0;
    for (const auto& t : g.terms) {
      scale = std::max(scale, std::abs(t.c));
      bool merged = false;
      for (auto& p : pend) {
        if (std::abs(p.m - t.m) <= 1e-9) {
          p.c += t.c;
          merged = true;
          break;
        }
      }
      if (!merged) pend.push_back({t.m, t.c});
    }
    for (int iter = 0; iter < 48 && !pend.empty(); ++iter) {
      std::size_t idx = 0;
      for (std::size_t i = 1; i < pend.size(); ++i)
        if (pend[i].m > pend[idx].m) idx = i;
      Pending p = pend[idx];
      pend.erase(pend.begin() + static_cast<std::ptrdiff_t>(idx));
      if (std::abs(p.c) <= 1e-12 * scale) continue;
      parts.push_back(power_exp_part(snap_scalar(p.c / g.r), p.m, g.r, alpha));
      double nm = p.m - alpha;
      double nc = -p.c * p.m / g.r;
      if (std::abs(p.m) <= 1e-12 || std::abs(nc) <= 1e-12 * scale) continue;
      bool merged = false;
      for (auto& q : pend) {
        if (std::abs(q.m - nm) <= 1e-9) {
          q.c += nc;
          merged = true;
          break;
        }
      }
      if (!merged) pend.push_back({nm, nc});
    }
    for (const auto& p : pend)
      if (std::abs(p.c) > 1e-12 * scale) return std::nullopt;  // diverged
  }

  if (parts.empty()) parts.push_back(Expr::constant(0.0));
  Expr F = simplify(Expr::sum(std::move(parts)));
  if (!verify_derivative(F, f, Var::X, cfg.probes, cfg.fit_tol, alpha))
    return std::nullopt;
  return F;
}

}  // namespace confode
