#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "confode/classify.hpp"
#include "confode/fixtures.hpp"

using namespace confode;

namespace {

Expr c(double v) { return Expr::constant(v); }

std::vector<std::string> tags(const OdeProblem& p) {
  std::vector<std::string> out;
  for (const auto& cl : classify(p)) out.push_back(family_name(cl));
  return out;
}

bool has_tag(const std::vector<std::string>& ts, const std::string& t) {
  for (const auto& s : ts)
    if (s == t) return true;
  return false;
}

const OdeClass* find_class(const std::vector<OdeClass>& cs, const char* name) {
  for (const auto& cl : cs)
    if (std::string(family_name(cl)) == name) return &cl;
  return nullptr;
}

// Independent rebuild of the equation from the reported parameters, compared
// against the problem's own right-hand side on a positive grid.
void check_reconstruction(const OdeProblem& p, const OdeClass& cl) {
  Expr R = p.normal_rhs();
  const double alpha = p.alpha;
  auto model = [&](double x, double y) -> double {
    if (const auto* lin = std::get_if<LinearClass>(&cl))
      return eval_xy(lin->Q, x, y) - eval_xy(lin->P, x, y) * y;
    if (const auto* ber = std::get_if<BernoulliClass>(&cl))
      return eval_xy(ber->Q, x, y) * std::pow(y, ber->n) -
             eval_xy(ber->P, x, y) * y;
    if (const auto* sep = std::get_if<SeparableClass>(&cl))
      return -std::pow(x, 1.0 - alpha) * eval_xy(sep->x_factor, x, y) /
             eval_xy(sep->y_factor, x, y);
    if (const auto* sub = std::get_if<SubstitutionClass>(&cl)) {
      double z = sub->a * std::pow(x, alpha) + sub->b * y + sub->c;
      return eval_xy(sub->f, 0.0, z);
    }
    if (const auto* hom = std::get_if<HomogeneousClass>(&cl)) {
      double M = std::pow(x, hom->n + 1.0 - alpha) * eval_xy(hom->F, 0.0, y / x);
      double N = std::pow(x, hom->n) * eval_xy(hom->G, 0.0, y / x);
      return -M / N;
    }
    if (const auto* psi = std::get_if<PsiClass>(&cl))
      return std::pow(x, 1.0 - alpha) * eval_xy(psi->psi, 0.0, y / x);
    if (const auto* sh = std::get_if<ShiftedClass>(&cl)) {
      double l1 = sh->a1 * x + sh->b1 * y + sh->c1;
      double l2 = sh->a2 * x + sh->b2 * y + sh->c2;
      return -std::pow(x - sh->h, 1.0 - alpha) * l1 / l2;
    }
    const auto& ex = std::get<ExactClass>(cl);
    return -eval_xy(ex.M, x, y) / eval_xy(ex.N, x, y);
  };
  int used = 0;
  for (double x : {1.2, 1.7, 2.3, 2.9}) {
    for (double y : {0.4, 0.9, 1.6, 2.2}) {
      double want, got;
      try {
        want = eval_xy(R, x, y);
        got = model(x, y);
      } catch (const EvalError&) {
        continue;
      }
      if (!std::isfinite(want) || !std::isfinite(got)) continue;
      ++used;
      CAPTURE(family_name(cl));
      CAPTURE(x);
      CAPTURE(y);
      CHECK(std::abs(got - want) <=
            1e-8 * std::max({std::abs(got), std::abs(want), 1.0}));
    }
  }
  CHECK(used >= 6);
}

}  // namespace

TEST_CASE("every fixture reports its expected family") {
  for (const Fixture& f : fixture_suite()) {
    CAPTURE(f.id);
    auto ts = tags(f.problem);
    CHECK(has_tag(ts, f.family));
  }
}

TEST_CASE("fixture classes rebuild their equations") {
  for (const Fixture& f : fixture_suite()) {
    CAPTURE(f.id);
    for (const auto& cl : classify(f.problem)) check_reconstruction(f.problem, cl);
  }
}

TEST_CASE("decay equation reports linear first, then separable") {
  auto ts = tags(fixture("ex2").problem);
  REQUIRE(ts.size() >= 2);
  CHECK(ts[0] == "linear");
  CHECK(has_tag(ts, "separable"));
}

TEST_CASE("squared-sum equation reports substitution with unit coefficients") {
  auto cs = classify(fixture("ex4").problem);
  const auto* cl = find_class(cs, "substitution");
  REQUIRE(cl != nullptr);
  const auto& sub = std::get<SubstitutionClass>(*cl);
  CHECK(sub.a == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sub.b == 1.0);
  CHECK(sub.c == 0.0);
  CHECK(eval_xy(sub.f, 0.0, 1.5) == doctest::Approx(2.25).epsilon(1e-9));
  CHECK_FALSE(has_tag(tags(fixture("ex4").problem), "separable"));
}

TEST_CASE("differential pair reports homogeneous with degree 1") {
  auto cs = classify(fixture("ex5").problem);
  const auto* cl = find_class(cs, "homogeneous");
  REQUIRE(cl != nullptr);
  const auto& hom = std::get<HomogeneousClass>(*cl);
  CHECK(hom.n == doctest::Approx(1.0).epsilon(1e-7));
  // F(u) = 1 + u, G(u) = -(2 + 3u)
  CHECK(eval_xy(hom.F, 0.0, 0.5) == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(eval_xy(hom.G, 0.0, 0.5) == doctest::Approx(-3.5).epsilon(1e-9));
}

TEST_CASE("ratio equation reports the psi form") {
  auto cs = classify(fixture("ex6").problem);
  const auto* cl = find_class(cs, "psi-form");
  REQUIRE(cl != nullptr);
  const auto& psi = std::get<PsiClass>(*cl);
  CHECK(eval_xy(psi.psi, 0.0, 2.0) == doctest::Approx(2.5).epsilon(1e-9));
  CHECK_FALSE(has_tag(tags(fixture("ex6").problem), "homogeneous"));
}

TEST_CASE("restricted-domain equation recovers the shift point from probes") {
  auto cs = classify(fixture("ex7").problem);
  const auto* cl = find_class(cs, "shifted-homogeneous");
  REQUIRE(cl != nullptr);
  const auto& sh = std::get<ShiftedClass>(*cl);
  CHECK(sh.h == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sh.k == doctest::Approx(2.0).epsilon(1e-6));
  // lines proportional to 2x - 3y + 4 and 3x - 2y + 1
  CHECK(sh.a1 / sh.b1 == doctest::Approx(-2.0 / 3.0).epsilon(1e-6));
  CHECK(sh.c1 / sh.b1 == doctest::Approx(-4.0 / 3.0).epsilon(1e-6));
  CHECK(sh.a2 / sh.b2 == doctest::Approx(-1.5).epsilon(1e-6));
  CHECK(sh.c2 / sh.b2 == doctest::Approx(-0.5).epsilon(1e-6));
}

TEST_CASE("bernoulli detection extracts the power and both coefficients") {
  auto cs = classify(fixture("ex10").problem);
  REQUIRE(!cs.empty());
  CHECK(std::string(family_name(cs[0])) == "bernoulli");
  const auto& ber = std::get<BernoulliClass>(cs[0]);
  CHECK(ber.n == doctest::Approx(2.0));
  CHECK(eval_xy(ber.P, 2.0, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  // Q = x^2 - 2 x^1.5 at alpha = 1/2
  CHECK(eval_xy(ber.Q, 2.0, 0.0) ==
        doctest::Approx(4.0 - 2.0 * std::pow(2.0, 1.5)).epsilon(1e-9));
}

TEST_CASE("exact pair accepted, perturbed pair rejected with witness") {
  const Fixture& f = fixture("ex11");
  auto rep = check_exactness(*f.problem.M, *f.problem.N, f.problem.alpha);
  CHECK(rep.exact);
  CHECK(rep.max_deviation <= 1e-7);
  CHECK(has_tag(tags(f.problem), "exact"));

  auto bad = check_exactness(Expr::y(), Expr::power(Expr::x(), c(2)), 0.5);
  CHECK_FALSE(bad.exact);
  CHECK(bad.max_deviation > 1e-2);
  CHECK(bad.at_x > 0.0);
}

TEST_CASE("decoupled differential pair is exact") {
  // M = x^{1-a} p(x), N = q(y): both sides of the witness vanish.
  double a = 0.7;
  Expr M = simplify(Expr::power(Expr::x(), c(1 - a)) * (Expr::x() + c(2)));
  Expr N = simplify(Expr::power(Expr::y(), c(2)) + c(1));
  CHECK(check_exactness(M, N, a).exact);
}

TEST_CASE("constant right-hand side is separable only") {
  auto ts = tags(OdeProblem::normal(c(3.0), 0.5));
  REQUIRE(ts.size() == 1);
  CHECK(ts[0] == "separable");
}

TEST_CASE("zero right-hand side is separable") {
  auto ts = tags(OdeProblem::normal(c(0.0), 0.5));
  CHECK(has_tag(ts, "separable"));
}

TEST_CASE("unstructured equation reports no family") {
  Expr rhs = Expr::apply(Builtin::Sin, Expr::x() * Expr::y());
  CHECK(tags(OdeProblem::normal(rhs, 0.5)).empty());
}

TEST_CASE("scaling both differential parts leaves the tag list unchanged") {
  const Fixture& f = fixture("ex5");
  auto base = tags(f.problem);
  OdeProblem scaled = OdeProblem::differential(simplify(c(3.7) * *f.problem.M),
                                               simplify(c(3.7) * *f.problem.N),
                                               f.problem.alpha);
  CHECK(tags(scaled) == base);
}

TEST_CASE("classical limit classifies like the textbook forms") {
  for (const char* id : {"ex2", "ex4", "ex5", "ex7", "ex10", "ex11"}) {
    CAPTURE(id);
    Fixture f = make_fixture(id, 1.0);
    CHECK(has_tag(tags(f.problem), f.family));
  }
}

TEST_CASE("pure power-of-y right-hand side stays out of the substitution family") {
  // f(z) with a = 0 is a plain function of y; separable owns it.
  Expr rhs = Expr::power(Expr::y(), c(2));
  auto ts = tags(OdeProblem::normal(rhs, 0.5));
  CHECK(has_tag(ts, "separable"));
  CHECK_FALSE(has_tag(ts, "substitution"));
}

TEST_CASE("normal and differential forms of one equation agree where defined") {
  const Fixture& f = fixture("ex5");
  Expr R = f.problem.normal_rhs();
  for (double x : {1.0, 1.5, 2.0}) {
    for (double y : {0.5, 1.0, 2.0}) {
      double m = eval_xy(*f.problem.M, x, y);
      double n = eval_xy(*f.problem.N, x, y);
      CHECK(eval_xy(R, x, y) == doctest::Approx(-m / n).epsilon(1e-12));
    }
  }
}
