#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Small symbolic expression layer used by the rest of the library.
//
// Expressions are immutable trees over the variables x and y, real
// constants, a reserved free-constant symbol (rendered as "C" or "A" in
// solution displays), the arithmetic operations sum / product / quotient /
// power / negation, and a fixed set of builtin functions.  Trees are shared
// via reference counting; all transformations return new trees.

namespace confode {

enum class Builtin : std::uint8_t {
  Exp,
  Ln,
  Sin,
  Cos,
  Tan,
  Arctan,
  Sqrt,
  Abs,
  Sign,  // sign(0) = 0, so d|u| = sign(u) u' is total
};

enum class Var : std::uint8_t { X, Y };

const char* builtin_name(Builtin b);
std::optional<Builtin> builtin_from_name(std::string_view name);

class Expr;

struct ConstantNode { double value; };
struct VarNode { Var var; };
struct ConstSymNode {};                       // free constant of a solution family
struct SumNode { std::vector<Expr> terms; };  // n-ary, parser builds binary
struct ProductNode { std::vector<Expr> factors; };
struct QuotientNode { std::shared_ptr<const Expr> num, den; };
struct PowerNode { std::shared_ptr<const Expr> base, exponent; };
struct NegNode { std::shared_ptr<const Expr> arg; };
struct ApplyNode { Builtin fn; std::shared_ptr<const Expr> arg; };

using ExprNode = std::variant<ConstantNode, VarNode, ConstSymNode, SumNode, ProductNode,
                              QuotientNode, PowerNode, NegNode, ApplyNode>;

// Thrown by eval on domain violations (log of a non-positive value, division
// by zero, fractional power of a negative base, unresolved constant symbol).
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

class Expr {
 public:
  Expr();  // constant 0

  static Expr constant(double v);
  static Expr var(Var v);
  static Expr x();
  static Expr y();
  static Expr constant_symbol();
  static Expr sum(std::vector<Expr> terms);
  static Expr product(std::vector<Expr> factors);
  static Expr quotient(Expr num, Expr den);
  static Expr power(Expr base, Expr exponent);
  static Expr neg(Expr arg);
  static Expr apply(Builtin fn, Expr arg);

  const ExprNode& node() const { return *node_; }

  bool is_constant() const;
  std::optional<double> constant_value() const;
  bool depends_on(Var v) const;
  bool has_constant_symbol() const;

  // Structural equality; numeric leaves compared with |a-b| <= tol*max(1,|a|,|b|).
  bool same_structure(const Expr& other, double tol = 1e-12) const;

 private:
  explicit Expr(ExprNode n);
  std::shared_ptr<const ExprNode> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

struct EvalPoint {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> constant;  // value for the constant symbol, if any
};

double eval(const Expr& e, const EvalPoint& at);
double eval_xy(const Expr& e, double x, double y);
double eval_x(const Expr& e, double x);

// Classical partial derivative with respect to `v`; the constant symbol and
// the other variable are treated as constants.
Expr diff_classical(const Expr& e, Var v);

// Value-preserving cleanup: constant folding, flattening of sums/products,
// like-term collection, exp merging, power merging, unit/zero elimination.
// Never changes the value at any evaluable point by more than 1e-12 relative.
Expr simplify(const Expr& e);

// Replaces every occurrence of variable `v` by `replacement` (which may
// itself mention x and y).  Substitution is simultaneous, not repeated.
Expr substitute(const Expr& e, Var v, const Expr& replacement);

// Swaps the roles of x and y, used to integrate in y with x-based machinery.
Expr swap_xy(const Expr& e);

struct RenderOptions {
  std::string x_name = "x";
  std::string y_name = "y";
  std::string constant_name = "C";
};

// Deterministic text form; parse(render(e)) evaluates identically to e.
std::string render(const Expr& e, const RenderOptions& opts = {});

// Shortest round-trip decimal form of a double ("0.5", "2", "1e-06" style).
std::string format_double(double v);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& what)
      : std::runtime_error(what), offset_(offset), expected_(std::move(expected)) {}
  std::size_t offset() const { return offset_; }                    // byte offset into input
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

// Recursive-descent parser for:
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | factor
//   factor := atom ('^' unary)?
//   atom   := number | 'x' | 'y' | ident '(' expr ')' | '(' expr ')'
// '^' is right-associative and binds tighter than a leading unary minus.
Expr parse(std::string_view text);

}  // namespace confode
