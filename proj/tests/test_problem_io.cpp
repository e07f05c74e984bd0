#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>
#include <vector>

#include "confode/classify.hpp"
#include "confode/fixtures.hpp"
#include "confode/problem_io.hpp"
#include "doctest.h"

using namespace confode;

namespace {

// Set by CMake to the repository checkout so the suite finds problems/.
std::string problems_dir() { return std::string(CONFODE_PROBLEMS_DIR); }

bool close(double a, double b, double tol = 1e-12) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("a normal-form file parses field by field") {
  const std::string text =
      "# comment line\n"
      "alpha = 0.7\n"
      "m = 2   # trailing comment\n"
      "rhs = x^m - y\n"
      "ic = 1, 2.5\n"
      "window = 0.5, 4\n";
  ProblemFile pf = parse_problem_text(text);
  CHECK_EQ(pf.alpha, doctest::Approx(0.7));
  REQUIRE(pf.rhs.has_value());
  CHECK_EQ(*pf.rhs, "x^m - y");
  CHECK_FALSE(pf.M.has_value());
  REQUIRE(pf.ic.has_value());
  CHECK_EQ(pf.ic->first, 1.0);
  CHECK_EQ(pf.ic->second, 2.5);
  REQUIRE(pf.window.has_value());
  CHECK_EQ(pf.window->first, 0.5);
  CHECK_EQ(pf.window->second, 4.0);
  CHECK_EQ(pf.params.at("m"), 2.0);

  OdeProblem p = to_problem(pf);
  CHECK_FALSE(p.is_differential());
  CHECK_EQ(eval_xy(p.normal_rhs(), 3.0, 1.0), doctest::Approx(8.0));
  CHECK_EQ(*p.x0, 1.0);
  CHECK_EQ(*p.y0, 2.5);
  CHECK_EQ(*p.window_lo, 0.5);
  CHECK_EQ(*p.window_hi, 4.0);
}

TEST_CASE("a differential-form file needs and keeps both coefficients") {
  ProblemFile pf = parse_problem_text(
      "alpha = 0.5\n"
      "M = x + y\n"
      "N = -(2*y)\n");
  OdeProblem p = to_problem(pf);
  REQUIRE(p.is_differential());
  CHECK_EQ(eval_xy(*p.M, 1.0, 2.0), doctest::Approx(3.0));
  CHECK_EQ(eval_xy(*p.N, 1.0, 2.0), doctest::Approx(-4.0));
  CHECK_FALSE(p.x0.has_value());
}

TEST_CASE("substitution hits whole words only") {
  ProblemFile pf;
  pf.alpha = 0.5;
  pf.params["n"] = 3.0;
  CHECK_EQ(substitute_params("x^alpha + y^n", pf), "x^(0.5) + y^(3)");
  // 'n' inside other identifiers stays; function names pass through
  CHECK_EQ(substitute_params("ln(x) + exp(n)", pf), "ln(x) + exp((3))");
  CHECK_EQ(substitute_params("alphax + n_n", pf), "alphax + n_n");
  pf.params["beta"] = -0.5;
  CHECK_EQ(substitute_params("x^beta", pf), "x^(-0.5)");
  CHECK_EQ(eval_x(parse(substitute_params("x^beta", pf)), 4.0), doctest::Approx(0.5));
}

TEST_CASE("malformed files are rejected with the offending line") {
  CHECK_THROWS_AS(parse_problem_text("rhs = x\n"), ProblemFormatError);  // no alpha
  CHECK_THROWS_AS(parse_problem_text("alpha = 0.5\n"), ProblemFormatError);  // no form
  CHECK_THROWS_AS(parse_problem_text("alpha = 0.5\nrhs = x\nM = x\nN = 1\n"),
                  ProblemFormatError);  // both forms
  CHECK_THROWS_AS(parse_problem_text("alpha = 0.5\nM = x\n"), ProblemFormatError);
  CHECK_THROWS_AS(parse_problem_text("alpha = 0.5\nrhs = x\nrhs = y\n"),
                  ProblemFormatError);  // duplicate
  CHECK_THROWS_AS(parse_problem_text("alpha = 0.5\nrhs = x\nflavor = up\n"),
                  ProblemFormatError);  // unknown key
  CHECK_THROWS_AS(parse_problem_text("alpha = zero\nrhs = x\n"), ProblemFormatError);
  CHECK_THROWS_AS(parse_problem_text("alpha = 0.5\nrhs = x\nic = 1\n"),
                  ProblemFormatError);  // pair needs a comma
  CHECK_THROWS_AS(parse_problem_text("alpha 0.5\n"), ProblemFormatError);

  CHECK_THROWS_AS(to_problem(parse_problem_text("alpha = 1.5\nrhs = x\n")),
                  ProblemFormatError);
  CHECK_THROWS_AS(to_problem(parse_problem_text("alpha = 0.5\nrhs = x\nwindow = 3, 1\n")),
                  ProblemFormatError);
  CHECK_THROWS_AS(to_problem(parse_problem_text("alpha = 0.5\nrhs = x +\n")),
                  ProblemFormatError);  // expression syntax error surfaces as format error
  CHECK_THROWS_AS(load_problem_file(problems_dir() + "/no-such-file.problem"),
                  ProblemFormatError);

  try {
    parse_problem_text("alpha = 0.5\nrhs = x\nflavor = up\n");
  } catch (const ProblemFormatError& e) {
    CHECK_NE(std::string(e.what()).find("line 3"), std::string::npos);
    CHECK_NE(std::string(e.what()).find("flavor"), std::string::npos);
  }
}

TEST_CASE("shipped problem files stay in lockstep with the built-in suite") {
  const std::vector<double> xs = {1.3, 1.9, 2.6};
  const std::vector<double> ys = {0.6, 1.7, -1.2};

  for (const Fixture& fx : fixture_suite()) {
    CAPTURE(fx.id);
    OdeProblem got = load_problem(problems_dir() + "/" + fx.id + ".problem");
    const OdeProblem& want = fx.problem;

    CHECK_EQ(got.alpha, want.alpha);
    CHECK_EQ(got.is_differential(), want.is_differential());
    REQUIRE(got.x0.has_value());
    CHECK(close(*got.x0, *want.x0));
    CHECK(close(*got.y0, *want.y0));
    CHECK(close(*got.window_lo, *want.window_lo));
    CHECK(close(*got.window_hi, *want.window_hi));

    auto agree = [&](const Expr& a, const Expr& b) {
      int compared = 0;
      for (double x : xs)
        for (double y : ys) {
          double va, vb;
          try {
            va = eval_xy(a, x, y);
            vb = eval_xy(b, x, y);
          } catch (const EvalError&) {
            continue;
          }
          CAPTURE(x);
          CAPTURE(y);
          CHECK(close(va, vb, 1e-11));
          ++compared;
        }
      CHECK_GE(compared, 6);
    };
    if (want.is_differential()) {
      agree(*got.M, *want.M);
      agree(*got.N, *want.N);
    } else {
      agree(got.normal_rhs(), want.normal_rhs());
    }

    // the parsed problem classifies into the same family as the built-in one
    bool found = false;
    for (const OdeClass& c : classify(got))
      if (fx.family == family_name(c)) found = true;
    CHECK(found);
  }
}
