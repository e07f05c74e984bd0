#include "confode/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "confode/quadrature.hpp"

namespace confode {

namespace {

const std::vector<double> kSignedProbes{-2.4, -1.6, -0.7, 0.4, 1.2, 2.1, 2.8};
const std::vector<double> kPositiveProbes{0.35, 0.7, 1.2, 1.7, 2.3, 2.9};

bool finite_ok(double v) { return std::isfinite(v) && std::abs(v) < 1e12; }

std::optional<double> try_eval(const Expr& e, double x, double y) {
  try {
    double v = eval_xy(e, x, y);
    if (finite_ok(v)) return v;
  } catch (const EvalError&) {
  }
  return std::nullopt;
}

// e(x, t) == 0 wherever it evaluates, probing the y slot over both signs.
bool vanishes_in_y(const Expr& e) {
  int seen = 0;
  for (double t : kSignedProbes)
    for (double x : {0.6, 1.4, 2.5}) {
      auto v = try_eval(e, x, t);
      if (!v) continue;
      ++seen;
      if (std::abs(*v) > 1e-11) return false;
    }
  return seen >= 3;
}

bool vanishes_in_x(const Expr& e) {
  int seen = 0;
  for (double x : kPositiveProbes) {
    auto v = try_eval(e, x, 1.0);
    if (!v) continue;
    ++seen;
    if (std::abs(*v) > 1e-11) return false;
  }
  return seen >= 3;
}

bool contains_exp(const Expr& e) {
  const auto& n = e.node();
  if (auto* ap = std::get_if<ApplyNode>(&n))
    return ap->fn == Builtin::Exp || contains_exp(*ap->arg);
  if (auto* s = std::get_if<SumNode>(&n)) {
    for (const auto& t : s->terms)
      if (contains_exp(t)) return true;
    return false;
  }
  if (auto* p = std::get_if<ProductNode>(&n)) {
    for (const auto& f : p->factors)
      if (contains_exp(f)) return true;
    return false;
  }
  if (auto* q = std::get_if<QuotientNode>(&n)) return contains_exp(*q->num) || contains_exp(*q->den);
  if (auto* pw = std::get_if<PowerNode>(&n)) return contains_exp(*pw->base) || contains_exp(*pw->exponent);
  if (auto* ng = std::get_if<NegNode>(&n)) return contains_exp(*ng->arg);
  return false;
}

struct CoeffCore {
  double coeff = 1.0;
  std::optional<Expr> core;  // absent: the whole term is the constant `coeff`
};

CoeffCore split_coefficient(const Expr& t) {
  const auto& n = t.node();
  if (auto* c = std::get_if<ConstantNode>(&n)) return {c->value, std::nullopt};
  if (auto* ng = std::get_if<NegNode>(&n)) {
    auto inner = split_coefficient(*ng->arg);
    inner.coeff = -inner.coeff;
    return inner;
  }
  if (auto* p = std::get_if<ProductNode>(&n)) {
    double coeff = 1.0;
    std::vector<Expr> rest;
    for (const auto& f : p->factors) {
      auto s = split_coefficient(f);
      coeff *= s.coeff;
      if (s.core) rest.push_back(*s.core);
    }
    if (rest.empty()) return {coeff, std::nullopt};
    if (rest.size() == 1) return {coeff, rest[0]};
    return {coeff, Expr::product(rest)};
  }
  if (auto* q = std::get_if<QuotientNode>(&n)) {
    auto num = split_coefficient(*q->num);
    auto den = split_coefficient(*q->den);
    if (den.coeff == 0.0) return {1.0, t};
    double coeff = num.coeff / den.coeff;
    if (!den.core) return {coeff, num.core};
    Expr ncore = num.core ? *num.core : Expr::constant(1);
    return {coeff, Expr::quotient(ncore, *den.core)};
  }
  return {1.0, t};
}

// One additive piece of an implicit relation: coeff * core, where core may be
// a recognized logarithm ln(arg) or ln(abs(arg)).
struct RelTerm {
  double coeff = 1.0;
  Expr core;
  bool is_log = false;
  Expr log_arg;
  bool log_abs = false;
};

Expr log_core(const RelTerm& t) {
  Expr a = t.log_abs ? Expr::apply(Builtin::Abs, t.log_arg) : t.log_arg;
  return Expr::apply(Builtin::Ln, a);
}

// Constant factors inside a logarithm only shift the family constant, so
// they are divided out; a common leading coefficient of a sum argument is
// divided out the same way.
std::pair<Expr, bool> clean_log_arg(Expr arg, bool wrapped) {
  auto cc = split_coefficient(arg);
  if (cc.core) {
    double k = cc.coeff;
    if (std::abs(k - 1.0) > 1e-12 && k != 0.0) {
      if (wrapped || k > 0)
        arg = *cc.core;
      else
        arg = simplify(Expr::neg(*cc.core));
    }
  }
  if (auto* s = std::get_if<SumNode>(&arg.node()); s && !s->terms.empty()) {
    auto lead = split_coefficient(s->terms.front());
    double k = lead.coeff;
    if (std::abs(k - 1.0) > 1e-12 && k != 0.0 && (wrapped || k > 0)) {
      std::vector<Expr> scaled;
      scaled.reserve(s->terms.size());
      for (const auto& t : s->terms) scaled.push_back(simplify(Expr::constant(1.0 / k) * t));
      arg = Expr::sum(scaled);
    }
  }
  return {arg, wrapped};
}

std::optional<RelTerm> make_rel_term(const Expr& term) {
  auto cc = split_coefficient(simplify(term));
  if (!cc.core) return std::nullopt;
  if (std::abs(cc.coeff) < 1e-14) return std::nullopt;
  RelTerm rt;
  rt.coeff = cc.coeff;
  rt.core = *cc.core;
  if (auto* ap = std::get_if<ApplyNode>(&rt.core.node()); ap && ap->fn == Builtin::Ln) {
    Expr arg = *ap->arg;
    bool wrapped = false;
    if (auto* inner = std::get_if<ApplyNode>(&arg.node()); inner && inner->fn == Builtin::Abs) {
      arg = *inner->arg;
      wrapped = true;
    }
    if (arg.is_constant()) return std::nullopt;
    auto cleaned = clean_log_arg(arg, wrapped);
    rt.is_log = true;
    rt.log_arg = cleaned.first;
    rt.log_abs = cleaned.second;
    rt.core = log_core(rt);
  }
  return rt;
}

std::vector<RelTerm> collect_terms(const Expr& g) {
  std::vector<RelTerm> out;
  for (const auto& t : flatten_sum(simplify(g)))
    if (auto rt = make_rel_term(t)) out.push_back(*rt);
  return out;
}

// Divides through so the first y-dependent term has coefficient +1.
void scale_to_leading_y(std::vector<RelTerm>& ts) {
  for (const auto& t : ts) {
    if (!t.core.depends_on(Var::Y)) continue;
    double s = 1.0 / t.coeff;
    for (auto& u : ts) u.coeff *= s;
    return;
  }
}

Expr rebuild_sum(const std::vector<RelTerm>& ts) {
  std::vector<Expr> terms;
  terms.reserve(ts.size());
  for (const auto& t : ts) {
    Expr core = t.is_log ? log_core(t) : t.core;
    if (std::abs(t.coeff - 1.0) < 1e-12)
      terms.push_back(core);
    else if (std::abs(t.coeff + 1.0) < 1e-12)
      terms.push_back(Expr::neg(core));
    else
      terms.push_back(Expr::constant(t.coeff) * core);
  }
  if (terms.size() == 1) return terms[0];
  return Expr::sum(terms);
}

std::optional<std::vector<long>> integerize(const std::vector<double>& cs) {
  for (int s = 1; s <= 24; ++s) {
    bool ok = true;
    std::vector<long> out;
    for (double c : cs) {
      double v = c * s;
      double r = std::round(v);
      if (std::abs(v - r) > 1e-9 * std::max(1.0, std::abs(v)) || std::abs(r) > 12.5) {
        ok = false;
        break;
      }
      out.push_back(static_cast<long>(r));
    }
    if (!ok) continue;
    bool nonzero = false;
    for (long m : out) nonzero = nonzero || m != 0;
    if (nonzero) return out;
  }
  return std::nullopt;
}

// An all-logarithm relation with weights that scale to small integers is
// rewritten as a product of the arguments raised to those integers (constant
// relabeling C -> exp(s C)).  The heavier side goes to the numerator.
std::optional<Expr> exponentiate_logs(const std::vector<RelTerm>& ts) {
  if (ts.size() < 2) return std::nullopt;
  std::vector<double> cs;
  for (const auto& t : ts) {
    if (!t.is_log) return std::nullopt;
    cs.push_back(t.coeff);
  }
  auto ms = integerize(cs);
  if (!ms) return std::nullopt;
  long pos = 0, neg = 0;
  for (long m : *ms) (m > 0 ? pos : neg) += std::labs(m);
  if (neg > pos)
    for (long& m : *ms) m = -m;
  std::vector<Expr> num, den;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    long m = (*ms)[i];
    if (m == 0) continue;
    long a = std::labs(m);
    Expr f = a == 1 ? ts[i].log_arg
                    : Expr::power(ts[i].log_arg, Expr::constant(static_cast<double>(a)));
    (m > 0 ? num : den).push_back(f);
  }
  auto by_render = [](const Expr& a, const Expr& b) { return render(a) < render(b); };
  std::sort(num.begin(), num.end(), by_render);
  std::sort(den.begin(), den.end(), by_render);
  auto mk = [](std::vector<Expr>& v) {
    if (v.empty()) return Expr::constant(1);
    if (v.size() == 1) return v[0];
    return Expr::product(v);
  };
  Expr n = mk(num);
  if (den.empty()) return n;
  return Expr::quotient(n, mk(den));
}

bool is_sum(const Expr& e) { return std::get_if<SumNode>(&e.node()) != nullptr; }

// "num = C*den" for a quotient relation, "g = C" otherwise.
std::string implicit_display(const Expr& relation) {
  if (auto* q = std::get_if<QuotientNode>(&relation.node())) {
    std::string d = render(*q->den);
    if (is_sum(*q->den)) d = "(" + d + ")";
    return render(*q->num) + " = C*" + d;
  }
  return render(relation) + " = C";
}

std::function<double(double, double)> eval_invariant(const Expr& relation) {
  return [relation](double x, double y) { return eval_xy(relation, x, y); };
}

std::string fd(double v) { return format_double(v); }

double checked_quad(const std::function<double(double)>& f, double a, double b,
                    const NumericConfig& num) {
  QuadResult r = integrate_adaptive(f, a, b, num.quad_rel_tol, num.quad_abs_tol,
                                    num.max_quad_depth);
  if (!r.converged) throw EvalError("quadrature did not converge");
  return r.value;
}

Expr lnabs(Expr e) { return Expr::apply(Builtin::Ln, Expr::apply(Builtin::Abs, std::move(e))); }

Expr xpow(double p) { return Expr::power(Expr::x(), Expr::constant(p)); }

// a*x^alpha + b*y + c with zero pieces skipped.
Expr z_of_xy(double a, double b, double c, double alpha) {
  std::vector<Expr> terms;
  if (a != 0.0) terms.push_back(a == 1.0 ? xpow(alpha) : Expr::constant(a) * xpow(alpha));
  if (b != 0.0) terms.push_back(b == 1.0 ? Expr::y() : Expr::constant(b) * Expr::y());
  if (c != 0.0) terms.push_back(Expr::constant(c));
  if (terms.empty()) return Expr::constant(0);
  if (terms.size() == 1) return terms[0];
  return Expr::sum(terms);
}

// w = q*y + p with constant p, q; nullopt when w is not affine in y.
std::optional<std::pair<double, double>> affine_in_y(const Expr& w) {
  Expr d = simplify(diff_classical(w, Var::Y));
  auto q = d.constant_value();
  if (!q) return std::nullopt;
  Expr at0 = simplify(substitute(w, Var::Y, Expr::constant(0)));
  auto p = at0.constant_value();
  if (!p) return std::nullopt;
  if (at0.depends_on(Var::X)) return std::nullopt;
  return std::make_pair(*q, *p);
}

struct RootTerm {
  double coeff;
  double r;
};

// coeff * ln|arg(u)| rewritten as sum coeff_i * ln|u - r_i|, additive
// constants dropped.  Walks quotients, products, integer powers, affine
// pieces, and real-rooted quadratics; false on anything else.
bool log_roots(const Expr& arg, double coeff, std::vector<RootTerm>& out) {
  if (arg.depends_on(Var::X)) return false;
  if (arg.constant_value()) return true;
  if (auto* g = std::get_if<NegNode>(&arg.node())) return log_roots(*g->arg, coeff, out);
  if (auto* p = std::get_if<ProductNode>(&arg.node())) {
    for (const auto& f : p->factors)
      if (!log_roots(f, coeff, out)) return false;
    return true;
  }
  if (auto* q = std::get_if<QuotientNode>(&arg.node()))
    return log_roots(*q->num, coeff, out) && log_roots(*q->den, -coeff, out);
  if (auto* w = std::get_if<PowerNode>(&arg.node())) {
    auto k = w->exponent->constant_value();
    if (!k || std::abs(*k - std::round(*k)) > 1e-12 || std::abs(*k) > 9.0) return false;
    if (*k == 0.0) return true;
    return log_roots(*w->base, coeff * std::round(*k), out);
  }
  if (auto qp = affine_in_y(arg)) {
    auto [q, p] = *qp;
    if (q == 0.0) return p != 0.0;  // constant-valued arg: drop
    out.push_back({coeff, snap_rational(-p / q)});
    return true;
  }
  auto at = [&](double t) { return try_eval(arg, 1.0, t); };
  auto v0 = at(0.0), v1 = at(1.0), vm = at(-1.0);
  if (!v0 || !v1 || !vm) return false;
  double cq = *v0;
  double bq = (*v1 - *vm) / 2.0;
  double aq = (*v1 + *vm) / 2.0 - *v0;
  if (std::abs(aq) < 1e-12) return false;
  for (double t : {2.0, -2.0, 3.0, 0.5}) {
    auto v = at(t);
    if (!v) return false;
    double model = aq * t * t + bq * t + cq;
    if (std::abs(*v - model) > 1e-7 * std::max(1.0, std::abs(model))) return false;
  }
  double disc = bq * bq - 4.0 * aq * cq;
  if (disc < -1e-10 * std::max(1.0, bq * bq)) return false;
  double sq = std::sqrt(std::max(disc, 0.0));
  out.push_back({coeff, snap_rational((-bq - sq) / (2.0 * aq))});
  out.push_back({coeff, snap_rational((-bq + sq) / (2.0 * aq))});
  return true;
}

std::vector<RootTerm> merge_roots(const std::vector<RootTerm>& raw) {
  std::vector<RootTerm> merged;
  for (const auto& t : raw) {
    bool hit = false;
    for (auto& m : merged) {
      if (std::abs(m.r - t.r) <= 1e-7 * std::max(1.0, std::abs(m.r))) {
        m.coeff += t.coeff;
        hit = true;
        break;
      }
    }
    if (!hit) merged.push_back(t);
  }
  std::vector<RootTerm> out;
  for (const auto& m : merged)
    if (std::abs(m.coeff) > 1e-12) out.push_back(m);
  return out;
}

// ln|u - r| at u = y/x, displayed with integer line coefficients when r is a
// short rational: ln|q*y - p*x| (the dropped ln q only shifts C).
RelTerm root_rel_term(double coeff, double r) {
  double q = 1.0, p = r;
  for (int d = 1; d <= 12; ++d) {
    double v = r * d;
    if (std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, std::abs(v))) {
      q = d;
      p = std::round(v);
      break;
    }
  }
  std::vector<Expr> lin;
  lin.push_back(q == 1.0 ? Expr::y() : Expr::constant(q) * Expr::y());
  if (p != 0.0)
    lin.push_back(-p == 1.0 ? Expr::x() : Expr::constant(-p) * Expr::x());
  RelTerm rt;
  rt.coeff = coeff;
  rt.is_log = true;
  rt.log_abs = true;
  rt.log_arg = lin.size() == 1 ? lin[0] : Expr::sum(lin);
  rt.core = log_core(rt);
  return rt;
}

}  // namespace

const char* kind_name(SolutionKind k) {
  switch (k) {
    case SolutionKind::Explicit: return "explicit";
    case SolutionKind::Implicit: return "implicit";
    case SolutionKind::QuadratureImplicit: return "quadrature-implicit";
  }
  return "?";
}

SolverConfig solver_config_for(const OdeProblem& p) {
  SolverConfig cfg;
  if (p.x0) cfg.base_x = std::max(0.5, *p.x0 / 2.0);
  if (p.y0) cfg.base_y = *p.y0;
  return cfg;
}

Solution solve_separable(const Expr& x_factor, const Expr& y_factor, double alpha,
                         const SolverConfig& cfg) {
  require_alpha(alpha);
  Solution s;
  s.family = "separable";

  // integral of x_factor dx; the weighted engine sees the same integral with
  // the x^(1-alpha) weight attached, where its denominator patterns apply.
  std::optional<Expr> gx = classical_antiderivative(x_factor, Var::X, cfg.fit);
  if (!gx)
    gx = conformable_antiderivative(simplify(xpow(1.0 - alpha) * x_factor), alpha, cfg.fit);
  std::optional<Expr> gy = classical_antiderivative(y_factor, Var::Y, cfg.fit);
  if (!gy) {
    auto swapped =
        conformable_antiderivative(simplify(xpow(1.0 - alpha) * swap_xy(y_factor)), alpha, cfg.fit);
    if (swapped) gy = swap_xy(*swapped);
  }

  if (gx && gy) {
    std::vector<RelTerm> ts = collect_terms(*gy);
    for (const auto& t : collect_terms(*gx)) ts.push_back(t);
    scale_to_leading_y(ts);
    if (auto prod = exponentiate_logs(ts)) {
      s.kind = SolutionKind::Implicit;
      s.relation = *prod;
      s.display = implicit_display(*prod);
      s.invariant = eval_invariant(*prod);
      return s;
    }
    bool invertible = !ts.empty() && ts[0].is_log && std::abs(ts[0].coeff - 1.0) < 1e-12;
    if (invertible) {
      auto* v = std::get_if<VarNode>(&ts[0].log_arg.node());
      invertible = v && v->var == Var::Y;
      for (std::size_t i = 1; invertible && i < ts.size(); ++i)
        invertible = !ts[i].core.depends_on(Var::Y);
    }
    if (invertible) {
      // ln|y| + R(x) = C  =>  y = A exp(-R)
      std::vector<RelTerm> rest(ts.begin() + 1, ts.end());
      Expr R = rest.empty() ? Expr::constant(0) : rebuild_sum(rest);
      Expr eneg = Expr::apply(Builtin::Exp, simplify(Expr::neg(R)));
      Expr y_of_x = Expr::constant_symbol() * eneg;
      Expr relation = simplify(Expr::y() * Expr::apply(Builtin::Exp, simplify(R)));
      s.kind = SolutionKind::Explicit;
      s.y_of_x = y_of_x;
      s.relation = relation;
      s.invariant = eval_invariant(relation);
      s.explicit_value = [y_of_x](double x, double c) {
        return eval(y_of_x, EvalPoint{x, 0.0, c});
      };
      RenderOptions ro;
      ro.constant_name = "A";
      s.display = "y = " + render(y_of_x, ro);
      s.constant_name = "A";
      return s;
    }
    Expr relation = rebuild_sum(ts);
    s.kind = SolutionKind::Implicit;
    s.relation = relation;
    s.display = render(relation) + " = C";
    s.invariant = eval_invariant(relation);
    return s;
  }

  double bx = cfg.base_x, by = cfg.base_y;
  Expr F = x_factor, G = y_factor;
  NumericConfig num = cfg.num;
  s.kind = SolutionKind::QuadratureImplicit;
  s.invariant = [F, G, bx, by, num](double x, double y) {
    double ix = checked_quad([&](double t) { return eval_xy(F, t, 1.0); }, bx, x, num);
    double iy = checked_quad([&](double t) { return eval_xy(G, 1.0, t); }, by, y, num);
    return ix + iy;
  };
  RenderOptions tx, sy;
  tx.x_name = "t";
  sy.y_name = "s";
  s.display = "int[" + fd(bx) + ", x] " + render(x_factor, tx) + " dt + int[" + fd(by) +
              ", y] " + render(y_factor, sy) + " ds = C";
  return s;
}

Solution solve_substitution(double a, double b, double c, const Expr& f, double alpha,
                            const SolverConfig& cfg) {
  require_alpha(alpha);
  if (b == 0.0) throw UnsupportedForm("substitution form needs a y term (b != 0)");
  Solution s;
  s.family = "substitution";
  Expr zxy = z_of_xy(a, b, c, alpha);
  s.trace.push_back({"z = " + render(zxy)});

  // z' = a*alpha + b*f(z) along x^alpha/alpha
  Expr den = simplify(Expr::constant(a * alpha) + Expr::constant(b) * f);
  if (vanishes_in_y(den))
    throw DegenerateCase("a*alpha + b*f(z) vanishes identically: z is constant along solutions");
  Expr T = simplify(Expr::constant(1.0 / alpha) * xpow(alpha));
  std::optional<Expr> H =
      classical_antiderivative(simplify(Expr::quotient(Expr::constant(1), den)), Var::Y, cfg.fit);

  if (H) {
    auto cc = split_coefficient(simplify(*H));
    double c1 = cc.coeff;
    // c1 * arctan(q z + p) = T + C  =>  z = (tan(T/c1 + C) - p)/q
    if (cc.core && std::abs(c1) > 1e-14) {
      if (auto* ap = std::get_if<ApplyNode>(&cc.core->node());
          ap && ap->fn == Builtin::Arctan) {
        if (auto qp = affine_in_y(*ap->arg)) {
          double q = qp->first, p = qp->second;
          if (std::abs(q) > 1e-14) {
            Expr phase = simplify(Expr::constant(1.0 / c1) * T);
            Expr tanE = Expr::apply(Builtin::Tan, phase + Expr::constant_symbol());
            Expr zE = p == 0.0 ? Expr::constant(1.0 / q) * tanE
                               : Expr::constant(1.0 / q) * (tanE - Expr::constant(p));
            Expr yE = simplify(Expr::constant(1.0 / b) *
                               (zE - Expr::constant(a) * xpow(alpha) - Expr::constant(c)));
            Expr warg = substitute(*ap->arg, Var::Y, zxy);
            Expr relation = Expr::apply(Builtin::Arctan, warg) - phase;
            s.kind = SolutionKind::Explicit;
            s.y_of_x = yE;
            s.relation = relation;
            s.invariant = eval_invariant(relation);
            s.explicit_value = [yE](double x, double cv) {
              return eval(yE, EvalPoint{x, 0.0, cv});
            };
            s.display = "y = " + render(yE);
            return s;
          }
        }
      }
      // c1 * z = T + C  =>  y = (T/c1 - a x^alpha - c)/b + C
      if (auto* v = std::get_if<VarNode>(&cc.core->node()); v && v->var == Var::Y) {
        Expr y0 = simplify(Expr::constant(1.0 / b) *
                           (Expr::constant(1.0 / c1) * T - Expr::constant(a) * xpow(alpha) -
                            Expr::constant(c)));
        Expr yE = y0 + Expr::constant_symbol();
        Expr relation = simplify(Expr::y() - y0);
        s.kind = SolutionKind::Explicit;
        s.y_of_x = yE;
        s.relation = relation;
        s.invariant = eval_invariant(relation);
        s.explicit_value = [yE](double x, double cv) { return eval(yE, EvalPoint{x, 0.0, cv}); };
        s.display = "y = " + render(yE);
        return s;
      }
    }
    Expr Hz = simplify(substitute(*H, Var::Y, zxy));
    Expr relation = Expr::sum({Hz, Expr::neg(T)});
    s.kind = SolutionKind::Implicit;
    s.relation = relation;
    s.invariant = eval_invariant(relation);
    s.display = render(Hz) + " = " + render(T) + " + C";
    return s;
  }

  double zb = a * std::pow(cfg.base_x, alpha) + b * cfg.base_y + c;
  NumericConfig num = cfg.num;
  Expr denc = den;
  double aa = a, bb = b, ccc = c, al = alpha;
  s.kind = SolutionKind::QuadratureImplicit;
  s.invariant = [denc, zb, aa, bb, ccc, al, num](double x, double y) {
    double z = aa * std::pow(x, al) + bb * y + ccc;
    double iz = checked_quad([&](double t) { return 1.0 / eval_xy(denc, 1.0, t); }, zb, z, num);
    return iz - std::pow(x, al) / al;
  };
  RenderOptions rz;
  rz.y_name = "z";
  s.display = "int[" + fd(zb) + ", z] 1/(" + render(den, rz) + ") dz = " + render(T) +
              " + C, z = " + render(zxy);
  return s;
}

Solution solve_homogeneous(double n, const Expr& M, const Expr& N, double alpha,
                           const SolverConfig& cfg) {
  require_alpha(alpha);
  (void)n;
  Solution s;
  s.family = "homogeneous";
  s.trace.push_back({"u = y/x"});

  Expr F = simplify(substitute(M, Var::X, Expr::constant(1)));
  Expr G = simplify(substitute(N, Var::X, Expr::constant(1)));
  Expr D = simplify(Expr::sum({F, Expr::y() * G}));
  if (vanishes_in_y(D))
    throw DegenerateCase("F(u) + u*G(u) vanishes identically: the family is y = C*x");
  Expr W = simplify(Expr::quotient(G, D));

  std::optional<Expr> K = classical_antiderivative(W, Var::Y, cfg.fit);
  if (K) {
    std::vector<RelTerm> kterms = collect_terms(*K);
    bool rooted = !kterms.empty();
    std::vector<RootTerm> roots;
    for (const auto& t : kterms) {
      if (!t.is_log || !log_roots(t.log_arg, t.coeff, roots)) {
        rooted = false;
        break;
      }
    }
    if (rooted) {
      // ln|u - r| at u = y/x picks up a -ln|x| per unit weight
      std::vector<RelTerm> ts;
      double lnx_coeff = 1.0;
      std::vector<RelTerm> rewritten;
      for (const auto& rt : merge_roots(roots)) {
        lnx_coeff -= rt.coeff;
        rewritten.push_back(root_rel_term(rt.coeff, rt.r));
      }
      if (std::abs(lnx_coeff) > 1e-12) {
        RelTerm lx;
        lx.coeff = lnx_coeff;
        lx.is_log = true;
        lx.log_abs = true;
        lx.log_arg = Expr::x();
        lx.core = log_core(lx);
        ts.push_back(lx);
      }
      for (const auto& t : rewritten) ts.push_back(t);
      if (!ts.empty()) {
        if (auto prod = exponentiate_logs(ts)) {
          s.kind = SolutionKind::Implicit;
          s.relation = *prod;
          s.display = implicit_display(*prod);
          s.invariant = eval_invariant(*prod);
          return s;
        }
        Expr relation = rebuild_sum(ts);
        s.kind = SolutionKind::Implicit;
        s.relation = relation;
        s.display = render(relation) + " = C";
        s.invariant = eval_invariant(relation);
        return s;
      }
    }
    Expr Ku = simplify(substitute(*K, Var::Y, Expr::quotient(Expr::y(), Expr::x())));
    Expr relation = Expr::sum({lnabs(Expr::x()), Ku});
    s.kind = SolutionKind::Implicit;
    s.relation = relation;
    s.display = render(relation) + " = C";
    s.invariant = eval_invariant(relation);
    return s;
  }

  double ub = cfg.base_y / cfg.base_x;
  NumericConfig num = cfg.num;
  Expr Wc = W;
  s.kind = SolutionKind::QuadratureImplicit;
  s.invariant = [Wc, ub, num](double x, double y) {
    if (x <= 0.0) throw EvalError("homogeneous relation needs x > 0");
    double iu = checked_quad([&](double t) { return eval_xy(Wc, 1.0, t); }, ub, y / x, num);
    return std::log(x) + iu;
  };
  RenderOptions ru;
  ru.y_name = "u";
  s.display = "ln(x) + int[" + fd(ub) + ", y/x] " + render(W, ru) + " du = C";
  return s;
}

Solution solve_psi(const Expr& psi, double alpha, const SolverConfig& cfg) {
  require_alpha(alpha);
  Solution s;
  s.family = "psi-form";
  s.trace.push_back({"u = y/x"});

  Expr den = simplify(Expr::y() - psi);
  if (vanishes_in_y(den)) {
    // psi(u) = u: every ray y = C x solves the equation
    Expr yE = Expr::constant_symbol() * Expr::x();
    Expr relation = Expr::quotient(Expr::y(), Expr::x());
    s.kind = SolutionKind::Explicit;
    s.y_of_x = yE;
    s.relation = relation;
    s.invariant = eval_invariant(relation);
    s.explicit_value = [yE](double x, double c) { return eval(yE, EvalPoint{x, 0.0, c}); };
    s.display = "y = C*x";
    return s;
  }

  std::optional<Expr> K = classical_antiderivative(
      simplify(Expr::quotient(Expr::constant(1), den)), Var::Y, cfg.fit);
  if (K) {
    Expr Ku = simplify(substitute(*K, Var::Y, Expr::quotient(Expr::y(), Expr::x())));
    Expr g = Expr::sum({lnabs(Expr::x()), Ku});
    Expr relation = Expr::apply(Builtin::Exp, Expr::neg(g));
    s.kind = SolutionKind::Implicit;
    s.relation = relation;
    s.invariant = eval_invariant(relation);
    Expr shown = Expr::sum(
        {Expr::apply(Builtin::Ln, Expr::constant_symbol() * Expr::x()), Ku});
    s.display = render(shown) + " = 0";
    return s;
  }

  double ub = cfg.base_y / cfg.base_x;
  NumericConfig num = cfg.num;
  Expr denc = den;
  s.kind = SolutionKind::QuadratureImplicit;
  s.invariant = [denc, ub, num](double x, double y) {
    if (x <= 0.0) throw EvalError("relation needs x > 0");
    double iu =
        checked_quad([&](double t) { return 1.0 / eval_xy(denc, 1.0, t); }, ub, y / x, num);
    return std::exp(-(std::log(x) + iu));
  };
  RenderOptions ru;
  ru.y_name = "u";
  s.display =
      "ln(C*x) + int[" + fd(ub) + ", y/x] 1/(" + render(den, ru) + ") du = 0";
  return s;
}

Solution solve_shifted(double a1, double b1, double c1, double a2, double b2, double c2,
                       double alpha, const SolverConfig& cfg) {
  require_alpha(alpha);
  double det = a1 * b2 - a2 * b1;
  double scale = std::max({std::abs(a1 * b2), std::abs(a2 * b1), 1e-30});
  if (std::abs(det) <= 1e-10 * scale)
    throw UnsupportedForm("the two lines are parallel: no shift point exists");
  double h = (b1 * c2 - b2 * c1) / det;
  double k = (a2 * c1 - a1 * c2) / det;

  Expr L1 = simplify(Expr::constant(a1) * Expr::x() + Expr::constant(b1) * Expr::y());
  Expr L2 = simplify(Expr::constant(a2) * Expr::x() + Expr::constant(b2) * Expr::y());
  Expr Muv = simplify(xpow(1.0 - alpha) * L1);

  SolverConfig inner_cfg = cfg;
  inner_cfg.base_x = (cfg.base_x - h > 0.1) ? cfg.base_x - h : 1.0;
  inner_cfg.base_y = cfg.base_y - k;
  Solution inner = solve_homogeneous(1.0, Muv, L2, alpha, inner_cfg);

  Solution s;
  s.family = "shifted-homogeneous";
  s.kind = inner.kind;
  s.trace.push_back({"x = u + " + fd(h) + ", y = v + " + fd(k)});
  s.trace.push_back({"w = v/u"});

  if (inner.relation) {
    Expr back = simplify(substitute(
        substitute(*inner.relation, Var::X, Expr::x() - Expr::constant(h)), Var::Y,
        Expr::y() - Expr::constant(k)));
    s.relation = back;
    s.invariant = eval_invariant(back);
    s.display = implicit_display(back);
    return s;
  }
  auto ii = inner.invariant;
  s.invariant = [ii, h, k](double x, double y) { return ii(x - h, y - k); };
  RenderOptions uv;
  uv.x_name = "u";
  uv.y_name = "v";
  s.display = "with u = x - " + fd(h) + ", v = y - " + fd(k) + ": " + inner.display;
  return s;
}

namespace {

// exp(sign * I) with every k*ln(u) piece of I pulled out as a u^(sign*k)
// power factor, so pure-log antiderivatives exponentiate cleanly.
Expr exp_pull_logs(const Expr& I, double sign) {
  std::vector<Expr> factors;
  std::vector<Expr> rest;
  for (const auto& t : flatten_sum(simplify(I))) {
    auto cc = split_coefficient(t);
    if (cc.core) {
      if (const auto* ap = std::get_if<ApplyNode>(&cc.core->node());
          ap && ap->fn == Builtin::Ln) {
        Expr arg = *ap->arg;
        if (const auto* inner = std::get_if<ApplyNode>(&arg.node());
            inner && inner->fn == Builtin::Abs)
          arg = *inner->arg;  // factors live where the argument is positive
        double k = sign * cc.coeff;
        factors.push_back(std::abs(k - 1.0) < 1e-12
                              ? arg
                              : Expr::power(arg, Expr::constant(k)));
        continue;
      }
    }
    rest.push_back(t);
  }
  if (!rest.empty()) {
    Expr r = simplify(sign < 0 ? Expr::neg(Expr::sum(rest)) : Expr::sum(rest));
    factors.push_back(Expr::apply(Builtin::Exp, r));
  }
  if (factors.empty()) return Expr::constant(1);
  Expr out = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) out = out * factors[i];
  return simplify(out);
}

}  // namespace

Solution solve_linear(const Expr& P, const Expr& Q, double alpha, const SolverConfig& cfg) {
  require_alpha(alpha);
  Solution s;
  s.family = "linear";
  bool q_zero = vanishes_in_x(Q);

  std::optional<Expr> IP = conformable_antiderivative(P, alpha, cfg.fit);
  if (IP) {
    Expr mu = exp_pull_logs(*IP, 1.0);
    Expr eneg = exp_pull_logs(*IP, -1.0);
    std::optional<Expr> J;
    if (q_zero)
      J = Expr::constant(0);
    else
      J = conformable_antiderivative(simplify(mu * Q), alpha, cfg.fit);
    if (J) {
      Expr relation = simplify(Expr::y() * mu - *J);
      Expr cpart = simplify(Expr::constant_symbol() * eneg);
      Expr y_of_x;
      if (q_zero) {
        y_of_x = cpart;
        s.constant_name = "A";
      } else {
        Expr expanded = simplify(expand_products(eneg * *J));
        if (!contains_exp(expanded)) {
          y_of_x = Expr::sum({expanded, cpart});
          s.constant_name = "A";
        } else {
          y_of_x = (*J + Expr::constant_symbol()) * eneg;
        }
      }
      s.kind = SolutionKind::Explicit;
      s.y_of_x = y_of_x;
      s.relation = relation;
      s.invariant = eval_invariant(relation);
      s.explicit_value = [y_of_x](double x, double c) {
        return eval(y_of_x, EvalPoint{x, 0.0, c});
      };
      RenderOptions ro;
      ro.constant_name = s.constant_name;
      s.display = "y = " + render(y_of_x, ro);
      return s;
    }

    // closed integrating factor, quadrature for the forced part
    double bx = cfg.base_x;
    NumericConfig num = cfg.num;
    Expr muc = mu, enegc = eneg, Qc = Q;
    double al = alpha;
    auto Jq = [muc, Qc, al, bx, num](double x) {
      return conformable_integral(
          [&](double t) { return eval_xy(muc, t, 0.0) * eval_xy(Qc, t, 0.0); }, al, bx, x, num);
    };
    s.kind = SolutionKind::QuadratureImplicit;
    s.invariant = [muc, Jq](double x, double y) { return y * eval_xy(muc, x, 0.0) - Jq(x); };
    s.explicit_value = [enegc, Jq](double x, double c) {
      return eval_xy(enegc, x, 0.0) * (Jq(x) + c);
    };
    RenderOptions rt;
    rt.x_name = "t";
    s.display = "y = exp(-(" + render(*IP) + "))*(C + int[" + fd(bx) + ", x] exp(" +
                render(*IP, rt) + ")*(" + render(Q, rt) + ")*t^" + fd(alpha - 1.0) + " dt)";
    return s;
  }

  // no closed integrating factor: nest the quadratures
  double bx = cfg.base_x;
  NumericConfig num = cfg.num;
  Expr Pc = P, Qc = Q;
  double al = alpha;
  auto IPq = [Pc, al, bx, num](double x) {
    return conformable_integral([&](double t) { return eval_xy(Pc, t, 0.0); }, al, bx, x, num);
  };
  auto Jq = [IPq, Qc, al, bx, num](double x) {
    return conformable_integral(
        [&](double t) { return std::exp(IPq(t)) * eval_xy(Qc, t, 0.0); }, al, bx, x, num);
  };
  s.kind = SolutionKind::QuadratureImplicit;
  s.invariant = [IPq, Jq](double x, double y) { return y * std::exp(IPq(x)) - Jq(x); };
  s.explicit_value = [IPq, Jq](double x, double c) { return std::exp(-IPq(x)) * (Jq(x) + c); };
  RenderOptions rt;
  rt.x_name = "t";
  s.display = "y = exp(-IP(x))*(C + int[" + fd(bx) + ", x] exp(IP(t))*(" + render(Q, rt) +
              ")*t^" + fd(alpha - 1.0) + " dt), IP(x) = int[" + fd(bx) + ", x] (" +
              render(P, rt) + ")*t^" + fd(alpha - 1.0) + " dt";
  return s;
}

Solution solve_bernoulli(const Expr& P, const Expr& Q, double n, double alpha,
                         const SolverConfig& cfg) {
  require_alpha(alpha);
  if (n == 1.0) throw UnsupportedForm("n = 1 is the plain linear equation");
  double one = 1.0 - n;
  Solution lin = solve_linear(simplify(Expr::constant(one) * P),
                              simplify(Expr::constant(one) * Q), alpha, cfg);

  Solution s;
  s.family = "bernoulli";
  s.kind = lin.kind;
  std::string zlabel = n == 2.0 ? "1/y" : (one == 1.0 ? "y" : "y^" + fd(one));
  s.trace.push_back({"z = " + zlabel});

  Expr zpow = Expr::power(Expr::y(), Expr::constant(one));
  if (lin.relation) {
    Expr relation = simplify(substitute(*lin.relation, Var::Y, zpow));
    s.relation = relation;
    s.invariant = eval_invariant(relation);
  } else {
    auto li = lin.invariant;
    s.invariant = [li, one](double x, double y) {
      double z = std::pow(y, one);
      if (!std::isfinite(z)) throw EvalError("y^(1-n) undefined here");
      return li(x, z);
    };
  }
  if (lin.y_of_x) {
    Expr yE = simplify(Expr::power(*lin.y_of_x, Expr::constant(1.0 / one)));
    s.y_of_x = yE;
    s.explicit_value = [yE](double x, double c) { return eval(yE, EvalPoint{x, 0.0, c}); };
    s.display = zlabel + " = " + render(*lin.y_of_x);
  } else {
    auto le = lin.explicit_value;
    double inv = 1.0 / one;
    if (le)
      s.explicit_value = [le, inv](double x, double c) {
        double z = le(x, c);
        double y = std::pow(z, inv);
        if (!std::isfinite(y)) throw EvalError("z^(1/(1-n)) undefined here");
        return y;
      };
    std::string d = lin.display;
    if (d.rfind("y = ", 0) == 0) d = d.substr(4);
    s.display = zlabel + " = " + d;
  }
  for (const auto& st : lin.trace) s.trace.push_back(st);
  return s;
}

Solution solve_exact(const Expr& M, const Expr& N, double alpha, const SolverConfig& cfg) {
  require_alpha(alpha);
  auto chk = check_exactness(M, N, alpha);
  if (!chk.exact)
    throw UnsupportedForm("not exact: deviation " + fd(chk.max_deviation) + " at (" +
                          fd(chk.at_x) + ", " + fd(chk.at_y) + ")");
  Solution s;
  s.family = "exact";

  // multiplicative split of a term into pure-x and pure-y factors
  auto xy_split = [](const Expr& t) -> std::optional<std::pair<Expr, Expr>> {
    std::vector<Expr> xs, ys;
    std::function<bool(const Expr&, bool)> rec = [&](const Expr& e, bool inverted) -> bool {
      auto push = [&](std::vector<Expr>& v) {
        v.push_back(inverted ? Expr::quotient(Expr::constant(1), e) : e);
      };
      if (!e.depends_on(Var::Y)) {
        push(xs);
        return true;
      }
      if (!e.depends_on(Var::X)) {
        push(ys);
        return true;
      }
      const auto& nd = e.node();
      if (auto* p = std::get_if<ProductNode>(&nd)) {
        for (const auto& f : p->factors)
          if (!rec(f, inverted)) return false;
        return true;
      }
      if (auto* q = std::get_if<QuotientNode>(&nd))
        return rec(*q->num, inverted) && rec(*q->den, !inverted);
      if (auto* g = std::get_if<NegNode>(&nd)) {
        xs.push_back(Expr::constant(-1));
        return rec(*g->arg, inverted);
      }
      return false;
    };
    if (!rec(t, false)) return std::nullopt;
    auto mk = [](std::vector<Expr>& v) {
      if (v.empty()) return Expr::constant(1);
      if (v.size() == 1) return v[0];
      return Expr::product(v);
    };
    return std::make_pair(simplify(mk(xs)), simplify(mk(ys)));
  };

  auto symbolic = [&]() -> std::optional<Expr> {
    std::vector<Expr> f1terms;
    for (const auto& t : flatten_sum(expand_products(simplify(M)))) {
      auto parts = xy_split(t);
      if (!parts) return std::nullopt;
      auto Ix = conformable_antiderivative(parts->first, alpha, cfg.fit);
      if (!Ix) return std::nullopt;
      f1terms.push_back(simplify(*Ix * parts->second));
    }
    Expr f1 = f1terms.empty() ? Expr::constant(0) : simplify(Expr::sum(f1terms));
    Expr rest = simplify(N - diff_classical(f1, Var::Y));
    if (rest.depends_on(Var::X)) {
      // numeric fallback for cancellations the simplifier missed
      for (double y : kSignedProbes) {
        auto v1 = try_eval(rest, 0.7, y);
        auto v2 = try_eval(rest, 2.3, y);
        if (!v1 || !v2) continue;
        if (std::abs(*v1 - *v2) > 1e-9 * std::max({1.0, std::abs(*v1), std::abs(*v2)}))
          return std::nullopt;
      }
      rest = simplify(substitute(rest, Var::X, Expr::constant(1)));
    }
    auto f2 = classical_antiderivative(rest, Var::Y, cfg.fit);
    if (!f2) return std::nullopt;
    Expr f = simplify(f1 + *f2);
    int used = 0;
    for (double x : {0.6, 1.3, 2.4})
      for (double y : {0.5, 1.4, 2.2}) {
        try {
          double gx = conformable_partial(f, Var::X, alpha, x, y);
          double gy = eval_xy(diff_classical(f, Var::Y), x, y);
          double mv = eval_xy(M, x, y);
          double nv = eval_xy(N, x, y);
          if (std::abs(gx - mv) > 1e-6 * std::max(1.0, std::abs(mv)) ||
              std::abs(gy - nv) > 1e-6 * std::max(1.0, std::abs(nv)))
            return std::nullopt;
          ++used;
        } catch (const EvalError&) {
        }
      }
    if (used < 4) return std::nullopt;
    return f;
  };

  if (auto f = symbolic()) {
    s.kind = SolutionKind::Implicit;
    s.relation = *f;
    s.display = render(*f) + " = C";
    s.invariant = eval_invariant(*f);
    return s;
  }

  double bx = cfg.base_x, by = cfg.base_y;
  NumericConfig num = cfg.num;
  Expr Mc = M, Nc = N;
  double al = alpha;
  s.kind = SolutionKind::QuadratureImplicit;
  s.invariant = [Mc, Nc, al, bx, by, num](double x, double y) {
    double ix =
        conformable_integral([&](double t) { return eval_xy(Mc, t, by); }, al, bx, x, num);
    double iy = checked_quad([&](double t) { return eval_xy(Nc, x, t); }, by, y, num);
    return ix + iy;
  };
  RenderOptions rt, rs;
  rt.x_name = "t";
  rs.y_name = "s";
  s.display = "int[" + fd(bx) + ", x] " +
              render(simplify(substitute(M, Var::Y, Expr::constant(by))), rt) + "*t^" +
              fd(alpha - 1.0) + " dt + int[" + fd(by) + ", y] " + render(N, rs) + " ds = C";
  return s;
}

Solution solve(const OdeProblem& p, const OdeClass& cls, const SolverConfig& cfg) {
  double a = p.alpha;
  Solution s = std::visit(
      [&](const auto& c) -> Solution {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LinearClass>) {
          return solve_linear(c.P, c.Q, a, cfg);
        } else if constexpr (std::is_same_v<T, BernoulliClass>) {
          return solve_bernoulli(c.P, c.Q, c.n, a, cfg);
        } else if constexpr (std::is_same_v<T, SeparableClass>) {
          return solve_separable(c.x_factor, c.y_factor, a, cfg);
        } else if constexpr (std::is_same_v<T, SubstitutionClass>) {
          return solve_substitution(c.a, c.b, c.c, c.f, a, cfg);
        } else if constexpr (std::is_same_v<T, HomogeneousClass>) {
          return solve_homogeneous(c.n, p.diff_M(), p.diff_N(), a, cfg);
        } else if constexpr (std::is_same_v<T, PsiClass>) {
          return solve_psi(c.psi, a, cfg);
        } else if constexpr (std::is_same_v<T, ShiftedClass>) {
          return solve_shifted(c.a1, c.b1, c.c1, c.a2, c.b2, c.c2, a, cfg);
        } else {
          static_assert(std::is_same_v<T, ExactClass>);
          return solve_exact(c.M, c.N, a, cfg);
        }
      },
      cls);
  return s;
}

Solution solve(const OdeProblem& p, const OdeClass& cls) {
  return solve(p, cls, solver_config_for(p));
}

Solution solve_auto(const OdeProblem& p) {
  SolverConfig cfg = solver_config_for(p);
  std::string failures;
  for (const auto& cls : classify(p)) {
    try {
      return solve(p, cls, cfg);
    } catch (const SolverError& e) {
      failures += std::string(failures.empty() ? "" : "; ") + family_name(cls) + ": " + e.what();
    }
  }
  throw UnsupportedForm(failures.empty() ? "no known family matches this equation"
                                         : "no family produced a solution (" + failures + ")");
}

}  // namespace confode
