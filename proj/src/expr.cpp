#include "confode/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace confode {

namespace {

constexpr std::array<const char*, 9> kBuiltinNames = {
    "exp", "ln", "sin", "cos", "tan", "arctan", "sqrt", "abs", "sign"};

bool near(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

}  // namespace

const char* builtin_name(Builtin b) { return kBuiltinNames[static_cast<std::size_t>(b)]; }

std::optional<Builtin> builtin_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kBuiltinNames.size(); ++i)
    if (name == kBuiltinNames[i]) return static_cast<Builtin>(i);
  return std::nullopt;
}

Expr::Expr() : node_(std::make_shared<ExprNode>(ConstantNode{0.0})) {}
Expr::Expr(ExprNode n) : node_(std::make_shared<ExprNode>(std::move(n))) {}

Expr Expr::constant(double v) { return Expr(ConstantNode{v}); }
Expr Expr::var(Var v) { return Expr(VarNode{v}); }
Expr Expr::x() { return var(Var::X); }
Expr Expr::y() { return var(Var::Y); }
Expr Expr::constant_symbol() { return Expr(ConstSymNode{}); }

Expr Expr::sum(std::vector<Expr> terms) {
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return terms.front();
  return Expr(SumNode{std::move(terms)});
}

Expr Expr::product(std::vector<Expr> factors) {
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return factors.front();
  return Expr(ProductNode{std::move(factors)});
}

Expr Expr::quotient(Expr num, Expr den) {
  return Expr(QuotientNode{std::make_shared<const Expr>(std::move(num)),
                           std::make_shared<const Expr>(std::move(den))});
}

Expr Expr::power(Expr base, Expr exponent) {
  return Expr(PowerNode{std::make_shared<const Expr>(std::move(base)),
                        std::make_shared<const Expr>(std::move(exponent))});
}

Expr Expr::neg(Expr arg) { return Expr(NegNode{std::make_shared<const Expr>(std::move(arg))}); }

Expr Expr::apply(Builtin fn, Expr arg) {
  return Expr(ApplyNode{fn, std::make_shared<const Expr>(std::move(arg))});
}

bool Expr::is_constant() const { return std::holds_alternative<ConstantNode>(*node_); }

std::optional<double> Expr::constant_value() const {
  if (auto* c = std::get_if<ConstantNode>(node_.get())) return c->value;
  return std::nullopt;
}

bool Expr::depends_on(Var v) const {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode> || std::is_same_v<T, ConstSymNode>)
          return false;
        else if constexpr (std::is_same_v<T, VarNode>)
          return n.var == v;
        else if constexpr (std::is_same_v<T, SumNode>) {
          for (const auto& t : n.terms)
            if (t.depends_on(v)) return true;
          return false;
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          for (const auto& f : n.factors)
            if (f.depends_on(v)) return true;
          return false;
        } else if constexpr (std::is_same_v<T, QuotientNode>)
          return n.num->depends_on(v) || n.den->depends_on(v);
        else if constexpr (std::is_same_v<T, PowerNode>)
          return n.base->depends_on(v) || n.exponent->depends_on(v);
        else if constexpr (std::is_same_v<T, NegNode>)
          return n.arg->depends_on(v);
        else
          return n.arg->depends_on(v);
      },
      *node_);
}

bool Expr::has_constant_symbol() const {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstSymNode>)
          return true;
        else if constexpr (std::is_same_v<T, ConstantNode> || std::is_same_v<T, VarNode>)
          return false;
        else if constexpr (std::is_same_v<T, SumNode>) {
          for (const auto& t : n.terms)
            if (t.has_constant_symbol()) return true;
          return false;
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          for (const auto& f : n.factors)
            if (f.has_constant_symbol()) return true;
          return false;
        } else if constexpr (std::is_same_v<T, QuotientNode>)
          return n.num->has_constant_symbol() || n.den->has_constant_symbol();
        else if constexpr (std::is_same_v<T, PowerNode>)
          return n.base->has_constant_symbol() || n.exponent->has_constant_symbol();
        else if constexpr (std::is_same_v<T, NegNode>)
          return n.arg->has_constant_symbol();
        else
          return n.arg->has_constant_symbol();
      },
      *node_);
}

bool Expr::same_structure(const Expr& other, double tol) const {
  if (node_ == other.node_) return true;
  if (node_->index() != other.node_->index()) return false;
  const ExprNode& a = *node_;
  const ExprNode& b = *other.node_;
  if (auto* ca = std::get_if<ConstantNode>(&a))
    return near(ca->value, std::get<ConstantNode>(b).value, tol);
  if (auto* va = std::get_if<VarNode>(&a)) return va->var == std::get<VarNode>(b).var;
  if (std::holds_alternative<ConstSymNode>(a)) return true;
  if (auto* sa = std::get_if<SumNode>(&a)) {
    const auto& sb = std::get<SumNode>(b);
    if (sa->terms.size() != sb.terms.size()) return false;
    for (std::size_t i = 0; i < sa->terms.size(); ++i)
      if (!sa->terms[i].same_structure(sb.terms[i], tol)) return false;
    return true;
  }
  if (auto* pa = std::get_if<ProductNode>(&a)) {
    const auto& pb = std::get<ProductNode>(b);
    if (pa->factors.size() != pb.factors.size()) return false;
    for (std::size_t i = 0; i < pa->factors.size(); ++i)
      if (!pa->factors[i].same_structure(pb.factors[i], tol)) return false;
    return true;
  }
  if (auto* qa = std::get_if<QuotientNode>(&a)) {
    const auto& qb = std::get<QuotientNode>(b);
    return qa->num->same_structure(*qb.num, tol) && qa->den->same_structure(*qb.den, tol);
  }
  if (auto* wa = std::get_if<PowerNode>(&a)) {
    const auto& wb = std::get<PowerNode>(b);
    return wa->base->same_structure(*wb.base, tol) &&
           wa->exponent->same_structure(*wb.exponent, tol);
  }
  if (auto* na = std::get_if<NegNode>(&a)) return na->arg->same_structure(*std::get<NegNode>(b).arg, tol);
  const auto& fa = std::get<ApplyNode>(a);
  const auto& fb = std::get<ApplyNode>(b);
  return fa.fn == fb.fn && fa.arg->same_structure(*fb.arg, tol);
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, Expr::neg(b)}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::quotient(a, b); }
Expr operator-(const Expr& a) { return Expr::neg(a); }

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

double eval_power(double base, double expo) {
  if (base == 0.0) {
    if (expo > 0.0) return 0.0;
    if (expo == 0.0) return 1.0;
    throw EvalError("0 raised to a negative power");
  }
  if (base < 0.0 && !is_integer(expo))
    throw EvalError("fractional power of a negative base");
  double r = std::pow(base, expo);
  if (std::isnan(r)) throw EvalError("power evaluated to NaN");
  return r;
}

double eval_builtin(Builtin fn, double a) {
  switch (fn) {
    case Builtin::Exp: return std::exp(a);
    case Builtin::Ln:
      if (a <= 0.0) throw EvalError("ln of a non-positive value");
      return std::log(a);
    case Builtin::Sin: return std::sin(a);
    case Builtin::Cos: return std::cos(a);
    case Builtin::Tan: return std::tan(a);
    case Builtin::Arctan: return std::atan(a);
    case Builtin::Sqrt:
      if (a < 0.0) throw EvalError("sqrt of a negative value");
      return std::sqrt(a);
    case Builtin::Abs: return std::abs(a);
    case Builtin::Sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
  }
  throw EvalError("unknown builtin");
}

}  // namespace

double eval(const Expr& e, const EvalPoint& at) {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode>)
          return n.value;
        else if constexpr (std::is_same_v<T, VarNode>)
          return n.var == Var::X ? at.x : at.y;
        else if constexpr (std::is_same_v<T, ConstSymNode>) {
          if (!at.constant) throw EvalError("unresolved solution constant");
          return *at.constant;
        } else if constexpr (std::is_same_v<T, SumNode>) {
          double s = 0.0;
          for (const auto& t : n.terms) s += eval(t, at);
          return s;
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          double p = 1.0;
          for (const auto& f : n.factors) p *= eval(f, at);
          return p;
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          double den = eval(*n.den, at);
          if (den == 0.0) throw EvalError("division by zero");
          return eval(*n.num, at) / den;
        } else if constexpr (std::is_same_v<T, PowerNode>)
          return eval_power(eval(*n.base, at), eval(*n.exponent, at));
        else if constexpr (std::is_same_v<T, NegNode>)
          return -eval(*n.arg, at);
        else
          return eval_builtin(n.fn, eval(*n.arg, at));
      },
      e.node());
}

double eval_xy(const Expr& e, double x, double y) { return eval(e, EvalPoint{x, y, {}}); }
double eval_x(const Expr& e, double x) { return eval(e, EvalPoint{x, 0.0, {}}); }

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

Expr diff_classical(const Expr& e, Var v) {
  using E = Expr;
  return std::visit(
      [&](const auto& n) -> Expr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode> || std::is_same_v<T, ConstSymNode>)
          return E::constant(0.0);
        else if constexpr (std::is_same_v<T, VarNode>)
          return E::constant(n.var == v ? 1.0 : 0.0);
        else if constexpr (std::is_same_v<T, SumNode>) {
          std::vector<Expr> parts;
          parts.reserve(n.terms.size());
          for (const auto& t : n.terms) parts.push_back(diff_classical(t, v));
          return E::sum(std::move(parts));
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          // d(f1..fk) = sum_i f1..f'_i..fk
          std::vector<Expr> parts;
          for (std::size_t i = 0; i < n.factors.size(); ++i) {
            std::vector<Expr> factors = n.factors;
            factors[i] = diff_classical(n.factors[i], v);
            parts.push_back(E::product(std::move(factors)));
          }
          return E::sum(std::move(parts));
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          const Expr& f = *n.num;
          const Expr& g = *n.den;
          return E::quotient(diff_classical(f, v) * g - f * diff_classical(g, v),
                             E::power(g, E::constant(2.0)));
        } else if constexpr (std::is_same_v<T, PowerNode>) {
          const Expr& b = *n.base;
          const Expr& p = *n.exponent;
          if (!p.depends_on(Var::X) && !p.depends_on(Var::Y)) {
            // p * b^(p-1) * b'
            return p * E::power(b, p - E::constant(1.0)) * diff_classical(b, v);
          }
          // b^p * (p' ln b + p b'/b)
          return E::power(b, p) * (diff_classical(p, v) * E::apply(Builtin::Ln, b) +
                                   p * E::quotient(diff_classical(b, v), b));
        } else if constexpr (std::is_same_v<T, NegNode>)
          return E::neg(diff_classical(*n.arg, v));
        else {
          const Expr& a = *n.arg;
          Expr da = diff_classical(a, v);
          switch (n.fn) {
            case Builtin::Exp: return E::apply(Builtin::Exp, a) * da;
            case Builtin::Ln: return E::quotient(da, a);
            case Builtin::Sin: return E::apply(Builtin::Cos, a) * da;
            case Builtin::Cos: return E::neg(E::apply(Builtin::Sin, a) * da);
            case Builtin::Tan:
              // sec^2 = 1 + tan^2
              return (E::constant(1.0) +
                      E::power(E::apply(Builtin::Tan, a), E::constant(2.0))) *
                     da;
            case Builtin::Arctan:
              return E::quotient(da, E::constant(1.0) + E::power(a, E::constant(2.0)));
            case Builtin::Sqrt:
              return E::quotient(da, E::constant(2.0) * E::apply(Builtin::Sqrt, a));
            case Builtin::Abs:
              return E::apply(Builtin::Sign, a) * da;
            case Builtin::Sign:
              // zero almost everywhere; the jump at 0 is not represented
              return E::constant(0.0);
          }
          throw std::logic_error("unhandled builtin in diff");
        }
      },
      e.node());
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

Expr substitute(const Expr& e, Var v, const Expr& replacement) {
  using E = Expr;
  return std::visit(
      [&](const auto& n) -> Expr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode> || std::is_same_v<T, ConstSymNode>)
          return e;
        else if constexpr (std::is_same_v<T, VarNode>)
          return n.var == v ? replacement : e;
        else if constexpr (std::is_same_v<T, SumNode>) {
          std::vector<Expr> parts;
          parts.reserve(n.terms.size());
          for (const auto& t : n.terms) parts.push_back(substitute(t, v, replacement));
          return E::sum(std::move(parts));
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          std::vector<Expr> parts;
          parts.reserve(n.factors.size());
          for (const auto& f : n.factors) parts.push_back(substitute(f, v, replacement));
          return E::product(std::move(parts));
        } else if constexpr (std::is_same_v<T, QuotientNode>)
          return E::quotient(substitute(*n.num, v, replacement), substitute(*n.den, v, replacement));
        else if constexpr (std::is_same_v<T, PowerNode>)
          return E::power(substitute(*n.base, v, replacement),
                          substitute(*n.exponent, v, replacement));
        else if constexpr (std::is_same_v<T, NegNode>)
          return E::neg(substitute(*n.arg, v, replacement));
        else
          return E::apply(n.fn, substitute(*n.arg, v, replacement));
      },
      e.node());
}

Expr swap_xy(const Expr& e) {
  using E = Expr;
  return std::visit(
      [&](const auto& n) -> Expr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode> || std::is_same_v<T, ConstSymNode>)
          return e;
        else if constexpr (std::is_same_v<T, VarNode>)
          return E::var(n.var == Var::X ? Var::Y : Var::X);
        else if constexpr (std::is_same_v<T, SumNode>) {
          std::vector<Expr> parts;
          for (const auto& t : n.terms) parts.push_back(swap_xy(t));
          return E::sum(std::move(parts));
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          std::vector<Expr> parts;
          for (const auto& f : n.factors) parts.push_back(swap_xy(f));
          return E::product(std::move(parts));
        } else if constexpr (std::is_same_v<T, QuotientNode>)
          return E::quotient(swap_xy(*n.num), swap_xy(*n.den));
        else if constexpr (std::is_same_v<T, PowerNode>)
          return E::power(swap_xy(*n.base), swap_xy(*n.exponent));
        else if constexpr (std::is_same_v<T, NegNode>)
          return E::neg(swap_xy(*n.arg));
        else
          return E::apply(n.fn, swap_xy(*n.arg));
      },
      e.node());
}

// ---------------------------------------------------------------------------
// Simplification
// ---------------------------------------------------------------------------

namespace {

struct Term {
  double coeff;
  std::optional<Expr> core;  // nullopt means the constant term
};

// Splits a term into (numeric coefficient, structural core).
Term split_term(const Expr& e) {
  if (auto c = e.constant_value()) return {*c, std::nullopt};
  if (auto* neg = std::get_if<NegNode>(&e.node())) {
    Term t = split_term(*neg->arg);
    t.coeff = -t.coeff;
    return t;
  }
  if (auto* prod = std::get_if<ProductNode>(&e.node())) {
    double coeff = 1.0;
    std::vector<Expr> rest;
    for (const auto& f : prod->factors) {
      Term sub = split_term(f);
      coeff *= sub.coeff;
      if (sub.core) rest.push_back(*sub.core);
    }
    if (rest.empty()) return {coeff, std::nullopt};
    return {coeff, Expr::product(std::move(rest))};
  }
  if (auto* quot = std::get_if<QuotientNode>(&e.node())) {
    if (auto cd = quot->den->constant_value(); cd && *cd != 0.0) {
      Term t = split_term(*quot->num);
      t.coeff /= *cd;
      return t;
    }
  }
  return {1.0, e};
}

Expr with_coeff(double coeff, const Expr& core) {
  if (coeff == 1.0) return core;
  if (coeff == -1.0) return Expr::neg(core);
  // Negative coefficients keep the sign outermost; the magnitude lives in
  // the product.  Matches the fraction rebuild so both paths agree.
  if (coeff < 0.0) return Expr::neg(with_coeff(-coeff, core));
  if (auto* prod = std::get_if<ProductNode>(&core.node())) {
    std::vector<Expr> factors;
    factors.reserve(prod->factors.size() + 1);
    factors.push_back(Expr::constant(coeff));
    for (const auto& f : prod->factors) factors.push_back(f);
    return Expr::product(std::move(factors));
  }
  return Expr::product({Expr::constant(coeff), core});
}

Expr simplify_once(const Expr& e);

// Canonical multiplicative form: sign and numeric factor hoisted out,
// quotients flattened to a single level, powers of a shared base and exp
// factors merged across numerator and denominator.  This is what makes
// parse(render(e)) normalize back to the same tree: the grammar reads
// "-a/b" as (-a)/b and "c*a/b" as (c*a)/b.
struct Fraction {
  double coeff = 1.0;     // signed numeric factor of the numerator
  double den_const = 1.0; // positive numeric factor kept in the denominator
  std::vector<Expr> num, den;
};

void decompose(const Expr& e, bool inverted, Fraction& f) {
  if (auto c = e.constant_value()) {
    if (inverted) {
      if (*c == 0.0) {
        f.den.push_back(e);  // keep the division-by-zero error behavior
        return;
      }
      if (*c < 0.0) f.coeff = -f.coeff;
      f.den_const *= std::abs(*c);
    } else {
      f.coeff *= *c;
    }
    return;
  }
  if (auto* g = std::get_if<NegNode>(&e.node())) {
    f.coeff = -f.coeff;
    decompose(*g->arg, inverted, f);
    return;
  }
  if (auto* p = std::get_if<ProductNode>(&e.node())) {
    for (const auto& q : p->factors) decompose(q, inverted, f);
    return;
  }
  if (auto* q = std::get_if<QuotientNode>(&e.node())) {
    decompose(*q->num, inverted, f);
    decompose(*q->den, !inverted, f);
    return;
  }
  (inverted ? f.den : f.num).push_back(e);
}

Expr rebuild_fraction(const Expr& raw) {
  Fraction f;
  decompose(raw, false, f);
  if (f.coeff == 0.0) return Expr::constant(0.0);

  struct BasePow {
    Expr base;
    std::vector<Expr> expo_terms;
  };
  std::vector<BasePow> pows;
  std::vector<Expr> exp_args;
  std::vector<Expr> opaque_den;  // non-mergeable denominator leaves (e.g. const 0)
  auto add_factor = [&](const Expr& q, bool inverted) {
    Expr base = q;
    Expr expo = Expr::constant(1.0);
    if (auto* a = std::get_if<ApplyNode>(&q.node()); a && a->fn == Builtin::Exp) {
      exp_args.push_back(inverted ? Expr::neg(*a->arg) : *a->arg);
      return;
    }
    if (auto* w = std::get_if<PowerNode>(&q.node())) {
      base = *w->base;
      expo = *w->exponent;
    }
    if (inverted) expo = Expr::neg(expo);
    for (auto& bp : pows) {
      if (bp.base.same_structure(base)) {
        bp.expo_terms.push_back(expo);
        return;
      }
    }
    pows.push_back({base, {expo}});
  };
  for (const auto& q : f.num) add_factor(q, false);
  for (const auto& q : f.den) {
    if (q.constant_value() == 0.0)
      opaque_den.push_back(q);
    else
      add_factor(q, true);
  }

  std::vector<Expr> num_out, den_out;
  for (auto& bp : pows) {
    Expr expo = simplify_once(Expr::sum(bp.expo_terms));
    if (auto c = expo.constant_value()) {
      if (*c == 0.0) continue;
      if (*c == 1.0) {
        num_out.push_back(bp.base);
        continue;
      }
      if (*c == -1.0) {
        den_out.push_back(bp.base);
        continue;
      }
      if (*c < 0.0) {
        den_out.push_back(Expr::power(bp.base, Expr::constant(-*c)));
        continue;
      }
    }
    num_out.push_back(Expr::power(bp.base, expo));
  }
  if (!exp_args.empty()) {
    Expr arg = simplify_once(Expr::sum(std::move(exp_args)));
    if (auto c = arg.constant_value(); !(c && *c == 0.0))
      num_out.push_back(Expr::apply(Builtin::Exp, arg));
  }
  for (const auto& q : opaque_den) den_out.push_back(q);

  double mag = std::abs(f.coeff);
  bool negative = f.coeff < 0.0;
  if (f.den_const != 1.0 && mag != 1.0) {
    mag /= f.den_const;  // fold when the numerator factor is non-unit anyway
    f.den_const = 1.0;
  }
  if (mag != 1.0) num_out.insert(num_out.begin(), Expr::constant(mag));
  if (f.den_const != 1.0) den_out.insert(den_out.begin(), Expr::constant(f.den_const));

  Expr num = num_out.empty() ? Expr::constant(1.0) : Expr::product(std::move(num_out));
  Expr result = den_out.empty() ? num : Expr::quotient(num, Expr::product(std::move(den_out)));
  if (auto c = result.constant_value(); c && negative) return Expr::constant(-*c);
  return negative ? Expr::neg(result) : result;
}

Expr simplify_sum(const SumNode& n) {
  // Flatten, split into (coeff, core), merge structurally equal cores.
  std::vector<Expr> flat;
  std::function<void(const Expr&, bool)> collect = [&](const Expr& t, bool negate) {
    if (auto* s = std::get_if<SumNode>(&t.node())) {
      for (const auto& u : s->terms) collect(u, negate);
    } else if (auto* g = std::get_if<NegNode>(&t.node())) {
      collect(*g->arg, !negate);
    } else {
      flat.push_back(negate ? Expr::neg(t) : t);
    }
  };
  for (const auto& t : n.terms) collect(t, false);

  double const_acc = 0.0;
  std::vector<Term> groups;
  for (const auto& t : flat) {
    Term term = split_term(t);
    if (!term.core) {
      const_acc += term.coeff;
      continue;
    }
    bool merged = false;
    for (auto& g : groups) {
      if (g.core && g.core->same_structure(*term.core)) {
        g.coeff += term.coeff;
        merged = true;
        break;
      }
    }
    if (!merged) groups.push_back(term);
  }

  std::vector<Expr> out;
  for (const auto& g : groups) {
    if (g.coeff == 0.0) continue;
    out.push_back(with_coeff(g.coeff, *g.core));
  }
  if (const_acc != 0.0 || out.empty()) out.push_back(Expr::constant(const_acc));
  return Expr::sum(std::move(out));
}

Expr simplify_once(const Expr& e) {
  using E = Expr;
  return std::visit(
      [&](const auto& n) -> Expr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode> || std::is_same_v<T, VarNode> ||
                      std::is_same_v<T, ConstSymNode>)
          return e;
        else if constexpr (std::is_same_v<T, SumNode>) {
          std::vector<Expr> kids;
          kids.reserve(n.terms.size());
          for (const auto& t : n.terms) kids.push_back(simplify_once(t));
          return simplify_sum(SumNode{std::move(kids)});
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          std::vector<Expr> kids;
          kids.reserve(n.factors.size());
          for (const auto& f : n.factors) kids.push_back(simplify_once(f));
          return rebuild_fraction(E::product(std::move(kids)));
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          Expr num = simplify_once(*n.num);
          Expr den = simplify_once(*n.den);
          auto cn = num.constant_value();
          auto cd = den.constant_value();
          if (cn && cd && *cd != 0.0) return E::constant(*cn / *cd);
          return rebuild_fraction(E::quotient(num, den));
        } else if constexpr (std::is_same_v<T, PowerNode>) {
          Expr base = simplify_once(*n.base);
          Expr expo = simplify_once(*n.exponent);
          auto cb = base.constant_value();
          auto ce = expo.constant_value();
          if (ce && *ce == 0.0) return E::constant(1.0);
          if (ce && *ce == 1.0) return base;
          if (cb && *cb == 1.0) return E::constant(1.0);
          if (cb && ce) {
            if (*cb > 0.0 || is_integer(*ce)) {
              double r = std::pow(*cb, *ce);
              if (std::isfinite(r)) return E::constant(r);
            }
          }
          return E::power(base, expo);
        } else if constexpr (std::is_same_v<T, NegNode>) {
          Expr arg = simplify_once(*n.arg);
          if (auto c = arg.constant_value()) return E::constant(-*c);
          if (auto* g = std::get_if<NegNode>(&arg.node())) return *g->arg;
          if (std::holds_alternative<ProductNode>(arg.node()) ||
              std::holds_alternative<QuotientNode>(arg.node()))
            return rebuild_fraction(E::neg(arg));
          return E::neg(arg);
        } else {
          Expr arg = simplify_once(*n.arg);
          if (auto c = arg.constant_value()) {
            switch (n.fn) {
              case Builtin::Exp:
                if (*c == 0.0) return E::constant(1.0);
                break;
              case Builtin::Ln:
                if (*c == 1.0) return E::constant(0.0);
                break;
              case Builtin::Sin:
              case Builtin::Tan:
              case Builtin::Arctan:
                if (*c == 0.0) return E::constant(0.0);
                break;
              case Builtin::Cos:
                if (*c == 0.0) return E::constant(1.0);
                break;
              case Builtin::Sqrt:
                if (*c == 0.0 || *c == 1.0) return E::constant(*c);
                break;
              case Builtin::Abs:
                return E::constant(std::abs(*c));
              case Builtin::Sign:
                return E::constant(*c > 0.0 ? 1.0 : (*c < 0.0 ? -1.0 : 0.0));
            }
          }
          return E::apply(n.fn, arg);
        }
      },
      e.node());
}

}  // namespace

Expr simplify(const Expr& e) {
  Expr cur = e;
  for (int i = 0; i < 6; ++i) {
    Expr next = simplify_once(cur);
    if (next.same_structure(cur)) return next;
    cur = next;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  if (v == 0.0) return "0";  // normalizes -0
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

// Larger binds tighter.
enum Prec { kSum = 1, kProduct = 2, kNeg = 3, kPower = 4, kAtom = 5 };

int precedence(const Expr& e) {
  return std::visit(
      [](const auto& n) -> int {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, SumNode>)
          return kSum;
        else if constexpr (std::is_same_v<T, ProductNode> || std::is_same_v<T, QuotientNode>)
          return kProduct;
        else if constexpr (std::is_same_v<T, NegNode>)
          return kNeg;
        else if constexpr (std::is_same_v<T, PowerNode>)
          return kPower;
        else if constexpr (std::is_same_v<T, ConstantNode>)
          return n.value < 0.0 ? kNeg : kAtom;
        else
          return kAtom;
      },
      e.node());
}

std::string render_impl(const Expr& e, const RenderOptions& opts);

std::string wrap(const Expr& e, const RenderOptions& opts, int min_prec) {
  std::string s = render_impl(e, opts);
  if (precedence(e) < min_prec) return "(" + s + ")";
  return s;
}

std::string render_impl(const Expr& e, const RenderOptions& opts) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode>)
          return format_double(n.value);
        else if constexpr (std::is_same_v<T, VarNode>)
          return n.var == Var::X ? opts.x_name : opts.y_name;
        else if constexpr (std::is_same_v<T, ConstSymNode>)
          return opts.constant_name;
        else if constexpr (std::is_same_v<T, SumNode>) {
          std::string s;
          for (std::size_t i = 0; i < n.terms.size(); ++i) {
            const Expr& t = n.terms[i];
            if (i == 0) {
              s = wrap(t, opts, kSum);
              continue;
            }
            // Render "+ (-u)" as "- u".
            if (auto* g = std::get_if<NegNode>(&t.node())) {
              s += " - " + wrap(*g->arg, opts, kProduct);
              continue;
            }
            Term split = split_term(t);
            if (split.coeff < 0.0) {
              Expr pos = split.core ? with_coeff(-split.coeff, *split.core)
                                    : Expr::constant(-split.coeff);
              s += " - " + wrap(pos, opts, kProduct);
              continue;
            }
            s += " + " + wrap(t, opts, kProduct);
          }
          return s;
        } else if constexpr (std::is_same_v<T, ProductNode>) {
          std::string s;
          for (std::size_t i = 0; i < n.factors.size(); ++i) {
            std::string f = wrap(n.factors[i], opts, i == 0 ? kProduct : kNeg + 1);
            if (i) s += "*";
            s += f;
          }
          return s;
        } else if constexpr (std::is_same_v<T, QuotientNode>) {
          // '/' is left-associative: the denominator needs parens at equal precedence.
          return wrap(*n.num, opts, kProduct) + "/" + wrap(*n.den, opts, kNeg + 1);
        } else if constexpr (std::is_same_v<T, PowerNode>) {
          // '^' accepts a unary rhs, so negated atoms are legal unparenthesized.
          std::string b = wrap(*n.base, opts, kAtom);
          const Expr& ex = *n.exponent;
          bool bare = precedence(ex) >= kNeg;
          if (auto* g = std::get_if<NegNode>(&ex.node()))
            bare = precedence(*g->arg) >= kNeg;
          std::string p = render_impl(ex, opts);
          if (!bare) p = "(" + p + ")";
          return b + "^" + p;
        } else if constexpr (std::is_same_v<T, NegNode>) {
          return "-" + wrap(*n.arg, opts, kProduct);
        } else {
          return std::string(builtin_name(n.fn)) + "(" + render_impl(*n.arg, opts) + ")";
        }
      },
      e.node());
}

}  // namespace

std::string render(const Expr& e, const RenderOptions& opts) { return render_impl(e, opts); }

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr run() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      fail({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"}, "unexpected trailing input");
    return e;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& msg) {
    std::ostringstream os;
    os << msg << " at byte " << pos_ << " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) os << (i + 1 == expected.size() ? " or " : ", ");
      os << expected[i];
    }
    os << ")";
    throw ParseError(pos_, std::move(expected), os.str());
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool peek_char(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  bool take_char(char c) {
    if (peek_char(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (take_char('+'))
        lhs = lhs + parse_term();
      else if (take_char('-'))
        lhs = lhs - parse_term();
      else
        return lhs;
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (take_char('*'))
        lhs = lhs * parse_unary();
      else if (take_char('/'))
        lhs = lhs / parse_unary();
      else
        return lhs;
    }
  }

  Expr parse_unary() {
    if (take_char('-')) return Expr::neg(parse_unary());
    return parse_factor();
  }

  Expr parse_factor() {
    Expr base = parse_atom();
    if (take_char('^')) return Expr::power(base, parse_unary());
    return base;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size())
      fail({"number", "'x'", "'y'", "function name", "'('"}, "unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_expr();
      if (!take_char(')')) fail({"')'"}, "unclosed parenthesis");
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    fail({"number", "'x'", "'y'", "function name", "'('"}, "unexpected character");
  }

  Expr parse_number() {
    double value = 0.0;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{}) fail({"number"}, "malformed number");
    pos_ += static_cast<std::size_t>(res.ptr - begin);
    return Expr::constant(value);
  }

  Expr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return Expr::x();
    if (name == "y") return Expr::y();
    auto fn = builtin_from_name(name);
    if (!fn) {
      pos_ = start;
      fail({"exp", "ln", "sin", "cos", "tan", "arctan", "sqrt", "abs", "sign"},
           "unknown identifier '" + std::string(name) + "'");
    }
    if (!take_char('(')) fail({"'('"}, "function name must be followed by '('");
    Expr arg = parse_expr();
    if (!take_char(')')) fail({"')'"}, "unclosed function argument");
    return Expr::apply(*fn, arg);
  }
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).run(); }

}  // namespace confode
