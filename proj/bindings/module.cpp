#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "confode/classify.hpp"
#include "confode/conformable.hpp"
#include "confode/fixtures.hpp"
#include "confode/problem_io.hpp"
#include "confode/solvers.hpp"
#include "confode/verify.hpp"

namespace py = pybind11;

namespace {

using namespace confode;

const OdeClass* pick_class(const std::vector<OdeClass>& classes,
                           const std::string& family) {
  if (classes.empty()) return nullptr;
  if (family.empty()) return &classes.front();
  for (const OdeClass& c : classes)
    if (family == family_name(c)) return &c;
  return nullptr;
}

std::vector<std::string> classify_names(const OdeProblem& p) {
  std::vector<std::string> out;
  for (const OdeClass& c : classify(p)) out.push_back(family_name(c));
  return out;
}

py::dict solve_dict(const OdeProblem& p, const std::string& family) {
  const std::vector<OdeClass> classes = classify(p);
  const OdeClass* chosen = pick_class(classes, family);
  if (!chosen)
    throw UnsupportedForm(family.empty() ? "no known family matched"
                                         : "family '" + family + "' does not apply");
  Solution s = solve(p, *chosen, solver_config_for(p));
  py::dict d;
  d["family"] = s.family;
  d["kind"] = kind_name(s.kind);
  d["display"] = s.display;
  d["constant_name"] = s.constant_name;
  if (p.x0) d["constant"] = fit_constant(s, *p.x0, *p.y0);
  return d;
}

py::dict report_dict(const FixtureReport& r) {
  py::dict d;
  d["id"] = r.id;
  d["family"] = r.family;
  d["kind"] = kind_name(r.kind);
  d["display"] = r.display;
  d["constant"] = r.constant;
  d["max_residual"] = r.metrics.max_residual;
  d["constant_drift"] = r.metrics.constant_drift;
  d["oracle_max_gap"] = r.metrics.oracle_max_gap;
  d["variant_note"] = r.variant_note;
  d["error"] = r.error;
  d["pass"] = r.pass;
  return d;
}

py::dict verify_dict(const OdeProblem& p, const std::string& id,
                     const std::string& family, int samples) {
  VerifyConfig cfg;
  cfg.samples = samples;
  return report_dict(verify_problem(p, id, family, cfg));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "closed-form solving and numeric verification of fractional-order ODEs";

  py::register_exception<ProblemFormatError>(m, "ProblemFormatError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ExprParseError", PyExc_ValueError);
  py::register_exception<UnsupportedForm>(m, "UnsupportedForm", PyExc_RuntimeError);
  py::register_exception<DegenerateCase>(m, "DegenerateCase", PyExc_RuntimeError);

  m.def(
      "derive",
      [](const std::string& f, double alpha, double at) {
        return conformable_derivative(parse(f), alpha, at);
      },
      py::arg("f"), py::arg("alpha") = 1.0, py::arg("at") = 1.0,
      "Fractional derivative of order alpha of an expression in x, at a point.");

  m.def(
      "integrate",
      [](const std::string& f, double alpha, double lo, double hi) {
        return conformable_integral(parse(f), alpha, lo, hi);
      },
      py::arg("f"), py::arg("alpha") = 1.0, py::arg("lo") = 0.0, py::arg("hi") = 1.0,
      "Fractional integral of order alpha of an expression in x over [lo, hi].");

  m.def(
      "classify_text",
      [](const std::string& text) {
        return classify_names(to_problem(parse_problem_text(text)));
      },
      py::arg("text"), "Family tags of a problem given in the key = value format.");

  m.def(
      "classify_file",
      [](const std::string& path) { return classify_names(load_problem(path)); },
      py::arg("path"), "Family tags of a problem file.");

  m.def(
      "solve_text",
      [](const std::string& text, const std::string& family) {
        return solve_dict(to_problem(parse_problem_text(text)), family);
      },
      py::arg("text"), py::arg("family") = "",
      "Closed-form solution of a problem given in the key = value format; the\n"
      "constant is fitted when the problem carries an ic.");

  m.def(
      "solve_file",
      [](const std::string& path, const std::string& family) {
        return solve_dict(load_problem(path), family);
      },
      py::arg("path"), py::arg("family") = "", "Closed-form solution of a problem file.");

  m.def(
      "verify_text",
      [](const std::string& text, const std::string& family, int samples) {
        return verify_dict(to_problem(parse_problem_text(text)), "problem", family,
                           samples);
      },
      py::arg("text"), py::arg("family") = "", py::arg("samples") = 200,
      "Solve, then measure the solution against a numeric integration: slope\n"
      "residual, invariant drift and oracle gap, with ambiguity arbitration notes.");

  m.def(
      "verify_file",
      [](const std::string& path, const std::string& family, int samples) {
        std::string id = path;
        if (auto slash = id.find_last_of('/'); slash != std::string::npos)
          id = id.substr(slash + 1);
        if (auto dot = id.find_last_of('.'); dot != std::string::npos)
          id = id.substr(0, dot);
        return verify_dict(load_problem(path), id, family, samples);
      },
      py::arg("path"), py::arg("family") = "", py::arg("samples") = 200,
      "verify_text over a problem file.");

  m.def(
      "fixture_ids",
      [] {
        std::vector<std::string> ids;
        for (const Fixture& f : fixture_suite()) ids.push_back(f.id);
        return ids;
      },
      "Identifiers of the built-in worked examples.");

  m.def(
      "verify_fixture",
      [](const std::string& id, double alpha) {
        return report_dict(verify_fixture(make_fixture(id, alpha)));
      },
      py::arg("id"), py::arg("alpha") = 0.5,
      "Verification report of one built-in example at the given order.");
}
