#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "confode/expr.hpp"
#include "test_util.hpp"

using namespace confode;
using testutil::rel_err;

TEST_CASE("parse builds the documented tree shapes") {
  Expr e = parse("x^2 + 3*y");
  Expr want = Expr::sum({Expr::power(Expr::x(), Expr::constant(2.0)),
                         Expr::product({Expr::constant(3.0), Expr::y()})});
  CHECK(e.same_structure(want));

  Expr q = parse("x^(1-0.5)*exp(x)/(1+exp(x))");
  double at1 = eval_x(q, 1.0);
  CHECK(rel_err(at1, std::exp(1.0) / (1.0 + std::exp(1.0))) < 1e-15);
}

TEST_CASE("operator precedence and associativity") {
  CHECK(eval_x(parse("1+2*3^2"), 0.0) == doctest::Approx(19.0).epsilon(1e-15));
  CHECK(eval_x(parse("2^3^2"), 0.0) == doctest::Approx(512.0).epsilon(1e-15));  // right assoc
  CHECK(eval_x(parse("-x^2"), 3.0) == doctest::Approx(-9.0));                   // -(x^2)
  CHECK(eval_x(parse("2^-1"), 0.0) == doctest::Approx(0.5));
  CHECK(eval_x(parse("6/3/2"), 0.0) == doctest::Approx(1.0));  // left assoc
  CHECK(eval_x(parse("2 - 3 - 4"), 0.0) == doctest::Approx(-5.0));
  CHECK(eval_x(parse(".5*x"), 2.0) == doctest::Approx(1.0));
  CHECK(eval_x(parse("1e-2"), 0.0) == doctest::Approx(0.01));
}

TEST_CASE("parse errors carry byte offsets and expected tokens") {
  try {
    parse("x + ");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 4);
    CHECK(!err.expected().empty());
  }

  try {
    parse("foo(x)");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 0);
    CHECK(std::string(err.what()).find("unknown identifier") != std::string::npos);
    CHECK(err.expected().size() == 9);  // the builtin list
  }

  CHECK_THROWS_AS(parse("(x"), ParseError);
  CHECK_THROWS_AS(parse("x 2"), ParseError);
  CHECK_THROWS_AS(parse("sin x"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
}

TEST_CASE("eval reports domain violations") {
  CHECK_THROWS_AS(eval_x(parse("ln(x)"), -1.0), EvalError);
  CHECK_THROWS_AS(eval_x(parse("ln(x)"), 0.0), EvalError);
  CHECK_THROWS_AS(eval_x(parse("1/x"), 0.0), EvalError);
  CHECK_THROWS_AS(eval_x(parse("x^0.5"), -2.0), EvalError);
  CHECK_THROWS_AS(eval_x(parse("x^-1"), 0.0), EvalError);
  CHECK_THROWS_AS(eval_x(parse("sqrt(x)"), -1.0), EvalError);
  CHECK(eval_x(parse("x^0"), 0.0) == doctest::Approx(1.0));
  CHECK(eval_x(parse("x^2"), -3.0) == doctest::Approx(9.0));  // integer powers allow x<0
  CHECK(eval_x(parse("abs(x)"), -3.5) == doctest::Approx(3.5));

  // The solution constant requires a binding.
  Expr with_c = Expr::x() + Expr::constant_symbol();
  CHECK_THROWS_AS(eval_xy(with_c, 1.0, 0.0), EvalError);
  CHECK(eval(with_c, EvalPoint{1.0, 0.0, 2.5}) == doctest::Approx(3.5));
}

TEST_CASE("diff_classical matches finite differences on random expressions") {
  testutil::ExprGen gen(1234, true);
  int checked = 0;
  for (int i = 0; i < 150 && checked < 60; ++i) {
    Expr e = gen.gen(3);
    Expr dx = diff_classical(e, Var::X);
    Expr dy = diff_classical(e, Var::Y);
    double x = 0.4 + 0.13 * (i % 17), y = 0.3 + 0.09 * (i % 13);
    try {
      double h = 1e-6;
      double fd_x = (eval_xy(e, x + h, y) - eval_xy(e, x - h, y)) / (2 * h);
      double fd_y = (eval_xy(e, x, y + h) - eval_xy(e, x, y - h)) / (2 * h);
      double sx = eval_xy(dx, x, y);
      double sy = eval_xy(dy, x, y);
      if (std::abs(fd_x) > 1e6 || std::abs(fd_y) > 1e6) continue;
      CHECK(rel_err(sx, fd_x) < 1e-5);
      CHECK(rel_err(sy, fd_y) < 1e-5);
      ++checked;
    } catch (const EvalError&) {
      continue;  // sampled outside the domain; skip
    }
  }
  CHECK(checked >= 40);
}

TEST_CASE("diff_classical handles the full node set") {
  CHECK(eval_x(diff_classical(parse("x^3"), Var::X), 2.0) == doctest::Approx(12.0));
  CHECK(eval_x(diff_classical(parse("exp(2*x)"), Var::X), 0.5) ==
        doctest::Approx(2.0 * std::exp(1.0)));
  CHECK(eval_x(diff_classical(parse("x/(1+x)"), Var::X), 1.0) == doctest::Approx(0.25));
  CHECK(eval_x(diff_classical(parse("ln(x)"), Var::X), 4.0) == doctest::Approx(0.25));
  CHECK(eval_x(diff_classical(parse("tan(x)"), Var::X), 0.3) ==
        doctest::Approx(1.0 / (std::cos(0.3) * std::cos(0.3))));
  CHECK(eval_x(diff_classical(parse("arctan(x)"), Var::X), 2.0) == doctest::Approx(0.2));
  CHECK(eval_x(diff_classical(parse("sqrt(x)"), Var::X), 4.0) == doctest::Approx(0.25));
  CHECK(eval_x(diff_classical(parse("abs(x)"), Var::X), -2.0) == doctest::Approx(-1.0));
  // x^x needs the general power rule
  CHECK(eval_x(diff_classical(parse("x^x"), Var::X), 2.0) ==
        doctest::Approx(4.0 * (std::log(2.0) + 1.0)));
}

TEST_CASE("simplify applies safe rewrites") {
  CHECK(simplify(parse("0+x")).same_structure(Expr::x()));
  CHECK(simplify(parse("1*x")).same_structure(Expr::x()));
  CHECK(simplify(parse("x^1")).same_structure(Expr::x()));
  CHECK(simplify(parse("x+x")).same_structure(parse("2*x")));
  CHECK(simplify(parse("x-x")).constant_value() == 0.0);
  CHECK(simplify(parse("exp(x)*exp(-x)")).constant_value() == 1.0);
  CHECK(simplify(parse("x*x")).same_structure(parse("x^2")));
  CHECK(simplify(parse("x^0.5*x^0.5")).same_structure(Expr::x()));
  CHECK(simplify(parse("2*3")).constant_value() == 6.0);
  CHECK(simplify(parse("2^3")).constant_value() == 8.0);
  CHECK(simplify(parse("--x")).same_structure(Expr::x()));
}

TEST_CASE("simplify preserves values on random expressions") {
  testutil::ExprGen gen(777, true);
  int checked = 0;
  for (int i = 0; i < 120 && checked < 80; ++i) {
    Expr e = gen.gen(3);
    Expr s = simplify(e);
    for (int k = 0; k < 5; ++k) {
      double x = 0.3 + 0.41 * k, y = 0.2 + 0.37 * k;
      try {
        double a = eval_xy(e, x, y);
        double b = eval_xy(s, x, y);
        CHECK(rel_err(a, b) < 1e-12);
        ++checked;
      } catch (const EvalError&) {
        continue;
      }
    }
  }
  CHECK(checked >= 60);
}

TEST_CASE("render and parse round trip") {
  testutil::ExprGen gen(4242, true);
  int structural = 0;
  for (int i = 0; i < 1000; ++i) {
    Expr e = gen.gen(3);
    std::string text = render(e);
    Expr back = parse(text);
    // Value agreement at probe points.
    for (int k = 0; k < 10; ++k) {
      double x = 0.25 + 0.3 * k, y = 0.15 + 0.27 * k;
      try {
        double a = eval_xy(e, x, y);
        double b = eval_xy(back, x, y);
        CHECK(rel_err(a, b) < 1e-12);
      } catch (const EvalError&) {
        continue;
      }
    }
    if (simplify(back).same_structure(simplify(e))) ++structural;
  }
  CHECK(structural == 1000);
}

TEST_CASE("render emits grammar-compatible text for tricky shapes") {
  CHECK(render(Expr::power(Expr::x(), Expr::constant(-1.0))) == "x^-1");
  CHECK(render(Expr::neg(Expr::power(Expr::x(), Expr::constant(2.0)))) == "-x^2");
  CHECK(render(parse("x/(y*x)")) == "x/(y*x)");
  CHECK(render(parse("(x+y)^2")) == "(x + y)^2");
  CHECK(render(Expr::product({Expr::x(), Expr::constant(-2.0)})) == "x*(-2)");
  CHECK(render(Expr::power(Expr::constant(-2.0), Expr::constant(3.0))) == "(-2)^3");
  CHECK(render(parse("x - (y - 1)")) == "x - (y - 1)");
  CHECK(parse(render(parse("x - (y - 1)"))).same_structure(parse("x - (y - 1)")));
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(-0.0) == "0");
}

TEST_CASE("substitute and swap_xy") {
  Expr e = parse("x^2 + y");
  Expr sub = substitute(e, Var::Y, parse("x/2"));
  CHECK(eval_x(sub, 2.0) == doctest::Approx(5.0));
  Expr sw = swap_xy(e);
  CHECK(eval_xy(sw, 3.0, 2.0) == doctest::Approx(7.0));
  // Simultaneous substitution: replacing x by y must not cascade.
  Expr both = substitute(parse("x + y"), Var::X, Expr::y());
  CHECK(eval_xy(both, 5.0, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("constant symbol renders with the configured name") {
  Expr family = Expr::product({Expr::constant_symbol(), Expr::apply(Builtin::Exp, Expr::x())});
  RenderOptions opts;
  opts.constant_name = "A";
  CHECK(render(family, opts) == "A*exp(x)");
  CHECK(render(family) == "C*exp(x)");
  CHECK(family.has_constant_symbol());
  CHECK(!parse("x+y").has_constant_symbol());
}
