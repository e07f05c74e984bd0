#include <clocale>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "confode/classify.hpp"
#include "confode/conformable.hpp"
#include "confode/ivp.hpp"
#include "confode/problem_io.hpp"
#include "confode/solvers.hpp"
#include "confode/verify.hpp"

namespace {

using namespace confode;

// Exit codes, also pinned by the golden tests.
constexpr int kOk = 0;
constexpr int kVerifyFailed = 1;
constexpr int kBadInput = 2;
constexpr int kNoFamily = 3;
constexpr int kUnsupportedFamily = 4;
constexpr int kDegenerate = 5;

struct Options {
  double tol_rel = 0.0;  // 0 keeps the library default
  double tol_abs = 0.0;
  double probe_min = 0.0;

  std::string file;
  std::string family = "auto";
  bool fit_ic = false;
  int samples = 200;
  std::vector<std::string> params;

  double alpha_from = 0.25;
  double alpha_to = 1.0;
  int steps = 4;
  int points = 41;
  std::string out = "-";

  std::string f_text;
  double alpha = 1.0;
  double from = 0.0;
  double to = 1.0;
  double at = 1.0;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> xs;
  if (n < 2) {
    xs.push_back(lo);
    return xs;
  }
  xs.reserve(n);
  for (int i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * i / (n - 1));
  return xs;
}

std::string stem(const std::string& path) {
  std::size_t slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

ClassifierConfig classifier_config(const Options& o) {
  ClassifierConfig c;
  if (o.probe_min > 0) c.probe_min = o.probe_min;
  return c;
}

VerifyConfig verify_config(const Options& o) {
  VerifyConfig v;
  v.samples = o.samples;
  if (o.tol_rel > 0) v.ivp.rel_tol = o.tol_rel;
  if (o.tol_abs > 0) v.ivp.abs_tol = o.tol_abs;
  return v;
}

NumericConfig numeric_config(const Options& o) {
  NumericConfig n;
  if (o.tol_rel > 0) n.quad_rel_tol = o.tol_rel;
  if (o.tol_abs > 0) n.quad_abs_tol = o.tol_abs;
  return n;
}

// name=value overrides on top of the file; value "alpha" tracks the order,
// which sweep re-resolves at every step.
void apply_params(ProblemFile& pf, const std::vector<std::string>& specs) {
  for (const std::string& s : specs) {
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ProblemFormatError("--param expects name=value, got '" + s + "'");
    std::string name = s.substr(0, eq);
    std::string value = s.substr(eq + 1);
    if (name != "alpha" && name != "m" && name != "n" && name != "r" && name != "beta")
      throw ProblemFormatError("--param: unknown parameter '" + name + "'");
    double v;
    if (value == "alpha") {
      v = pf.alpha;
    } else {
      const char* begin = value.c_str();
      char* end = nullptr;
      v = std::strtod(begin, &end);
      if (end == begin || *end != '\0')
        throw ProblemFormatError("--param " + name + ": bad value '" + value + "'");
    }
    if (name == "alpha")
      pf.alpha = v;
    else
      pf.params[name] = v;
  }
}

OdeProblem load_with_params(const Options& o) {
  ProblemFile pf = load_problem_file(o.file);
  apply_params(pf, o.params);
  return to_problem(pf);
}

// Human-facing family names; machine tags stay the family_name strings.
std::string family_label(const OdeClass& c) {
  if (const auto* h = std::get_if<HomogeneousClass>(&c))
    return "(" + format_double(h->n) + ",α)-homogeneous";
  if (const auto* s = std::get_if<SeparableClass>(&c))
    if (!s->y_factor.depends_on(Var::Y)) return "separable (substitution trivial)";
  return family_name(c);
}

const OdeClass* pick_class(const std::vector<OdeClass>& classes,
                           const std::string& family) {
  if (family == "auto" || family.empty()) return &classes.front();
  for (const OdeClass& c : classes)
    if (family == family_name(c)) return &c;
  return nullptr;
}

int cmd_classify(const Options& o) {
  OdeProblem p = load_with_params(o);
  std::vector<OdeClass> classes = classify(p, classifier_config(o));
  if (classes.empty()) {
    std::cerr << "no known family matched\n";
    return kNoFamily;
  }
  std::string line;
  for (const OdeClass& c : classes) {
    if (!line.empty()) line += "; ";
    line += family_label(c);
  }
  std::cout << line << "\n";
  return kOk;
}

int cmd_solve(const Options& o) {
  OdeProblem p = load_with_params(o);
  std::vector<OdeClass> classes = classify(p, classifier_config(o));
  if (classes.empty()) {
    std::cerr << "no known family matched\n";
    return kNoFamily;
  }
  const OdeClass* chosen = pick_class(classes, o.family);
  if (!chosen) {
    std::cerr << "family '" << o.family << "' does not apply to this problem\n";
    return kUnsupportedFamily;
  }
  Solution s = solve(p, *chosen, solver_config_for(p));
  std::cout << s.display << "\n";
  if (o.fit_ic) {
    if (!p.x0) {
      std::cerr << "--fit-ic needs an ic line in the problem file\n";
      return kBadInput;
    }
    double c = fit_constant(s, *p.x0, *p.y0);
    std::cout << s.constant_name << " = " << format_double(c) << "\n";
  }
  return kOk;
}

int cmd_verify(const Options& o) {
  OdeProblem p = load_with_params(o);
  if (!p.x0 || !p.window_lo) {
    std::cerr << "verify needs ic and window lines in the problem file\n";
    return kBadInput;
  }
  std::vector<OdeClass> classes = classify(p, classifier_config(o));
  if (classes.empty()) {
    std::cerr << "no known family matched\n";
    return kNoFamily;
  }
  std::string family;
  if (o.family != "auto") {
    if (!pick_class(classes, o.family)) {
      std::cerr << "family '" << o.family << "' does not apply to this problem\n";
      return kUnsupportedFamily;
    }
    family = o.family;
  }
  FixtureReport rep = verify_problem(p, stem(o.file), family, verify_config(o));
  std::cout << "family: " << rep.family << "\n";
  if (!rep.display.empty()) std::cout << "solution: " << rep.display << "\n";
  if (rep.error.empty()) {
    std::cout << "constant: " << format_double(rep.constant) << "\n";
    std::cout << "max_residual: " << sci(rep.metrics.max_residual) << "\n";
    std::cout << "constant_drift: " << sci(rep.metrics.constant_drift) << "\n";
    std::cout << "oracle_gap: " << sci(rep.metrics.oracle_max_gap) << "\n";
  }
  if (!rep.variant_note.empty()) std::cout << "variant: " << rep.variant_note << "\n";
  if (!rep.error.empty()) std::cout << "error: " << rep.error << "\n";
  std::cout << (rep.pass ? "pass" : "FAIL") << "\n";
  return rep.pass ? kOk : kVerifyFailed;
}

int cmd_sweep(const Options& o) {
  ProblemFile pf = load_problem_file(o.file);
  if (!pf.ic || !pf.window) {
    std::cerr << "sweep needs ic and window lines in the problem file\n";
    return kBadInput;
  }
  std::ofstream fout;
  std::ostream* os = &std::cout;
  if (o.out != "-") {
    fout.open(o.out, std::ios::binary);
    if (!fout) {
      std::cerr << "cannot open output file: " << o.out << "\n";
      return kBadInput;
    }
    os = &fout;
  }
  (*os) << "alpha,x,y_symbolic,y_oracle,gap\n";

  const int steps = std::max(1, o.steps);
  for (int k = 0; k < steps; ++k) {
    double a = steps == 1 ? o.alpha_from
                          : o.alpha_from + (o.alpha_to - o.alpha_from) * k / (steps - 1);
    pf.alpha = a;
    apply_params(pf, o.params);
    OdeProblem p = to_problem(pf);

    std::vector<OdeClass> classes = classify(p, classifier_config(o));
    if (classes.empty()) {
      std::cerr << "alpha = " << format_double(a) << ": no known family matched\n";
      return kNoFamily;
    }
    const OdeClass* chosen = pick_class(classes, o.family);
    if (!chosen) {
      std::cerr << "family '" << o.family << "' does not apply to this problem\n";
      return kUnsupportedFamily;
    }
    Solution s = solve(p, *chosen, solver_config_for(p));
    double x0 = *p.x0, y0 = *p.y0;
    double c = fit_constant(s, x0, y0);
    double center = 0.0;
    if (const auto* sh = std::get_if<ShiftedClass>(chosen)) center = sh->h;

    Expr f = p.normal_rhs();
    auto slope = [&f, a, center](double x, double y) {
      return std::pow(x - center, a - 1.0) * eval_xy(f, x, y);
    };
    IvpConfig icfg;
    if (o.tol_rel > 0) icfg.rel_tol = o.tol_rel;
    if (o.tol_abs > 0) icfg.abs_tol = o.tol_abs;

    const double lo = *p.window_lo, hi = *p.window_hi;
    IvpResult right, left;
    double reach_lo = x0, reach_hi = x0;
    if (hi > x0 + 1e-12) {
      right = solve_ivp(slope, x0, y0, hi, icfg);
      reach_hi = right.points.back().x;
    }
    if (lo < x0 - 1e-12) {
      left = solve_ivp(slope, x0, y0, lo, icfg);
      reach_lo = left.points.back().x;
    }

    // Rows stop at the oracle's reach or where either value blows up.
    std::vector<double> xs, yo;
    for (double x : linspace(lo, hi, std::max(2, o.points))) {
      double y;
      if (std::abs(x - x0) <= 1e-12 * std::max(1.0, std::abs(x0)))
        y = y0;
      else if (x > x0 && x <= reach_hi)
        y = sample_at(right, x);
      else if (x < x0 && x >= reach_lo)
        y = sample_at(left, x);
      else
        continue;
      if (!std::isfinite(y) || std::abs(y) > 1e8) continue;
      xs.push_back(x);
      yo.push_back(y);
    }

    std::vector<double> ys(xs.size(), 0.0);
    std::vector<bool> ok(xs.size(), false);
    if (s.explicit_value) {
      for (std::size_t i = 0; i < xs.size(); ++i) {
        try {
          double v = s.explicit_value(xs[i], c);
          if (std::isfinite(v) && std::abs(v) <= 1e8) {
            ys[i] = v;
            ok[i] = true;
          }
        } catch (const EvalError&) {
        }
      }
    } else {
      try {
        std::vector<double> tracked = implicit_track(s.invariant, x0, y0, xs, icfg);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          ys[i] = tracked[i];
          ok[i] = true;
        }
      } catch (const std::exception& e) {
        std::cerr << "alpha = " << format_double(a)
                  << ": level-curve tracking failed: " << e.what() << "\n";
      }
    }

    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!ok[i]) continue;
      (*os) << format_double(a) << ',' << format_double(xs[i]) << ','
            << format_double(ys[i]) << ',' << format_double(yo[i]) << ','
            << format_double(std::abs(ys[i] - yo[i])) << "\n";
    }
  }
  return kOk;
}

int cmd_integrate(const Options& o) {
  double v = conformable_integral(parse(o.f_text), o.alpha, o.from, o.to,
                                  numeric_config(o));
  std::cout << format_double(v) << "\n";
  return kOk;
}

int cmd_derive(const Options& o) {
  double v = conformable_derivative(parse(o.f_text), o.alpha, o.at);
  std::cout << format_double(v) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");

  Options o;
  CLI::App app{"solve and verify ODEs of fractional order through the weighted-slope calculus"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--tol-rel", o.tol_rel, "relative tolerance of the numeric kernels");
  app.add_option("--tol-abs", o.tol_abs, "absolute tolerance of the numeric kernels");
  app.add_option("--probe-min", o.probe_min,
                 "classifier probe points keep both coordinates this far from 0");

  auto add_file = [&](CLI::App* c) {
    c->add_option("file", o.file, "problem file")->required();
    c->add_option("--param", o.params, "override name=value ('alpha' as value tracks the order)")
        ->type_size(1);
  };

  CLI::App* c_classify = app.add_subcommand("classify", "list the solvable families");
  add_file(c_classify);

  CLI::App* c_solve = app.add_subcommand("solve", "print the closed-form solution");
  add_file(c_solve);
  c_solve->add_option("--family", o.family, "solve as this family instead of the first match");
  c_solve->add_flag("--fit-ic", o.fit_ic, "also print the constant fitted at the ic");

  CLI::App* c_verify = app.add_subcommand(
      "verify", "solve, then check the solution against a numeric integration");
  add_file(c_verify);
  c_verify->add_option("--family", o.family, "verify this family instead of the first match");
  c_verify->add_option("--samples", o.samples, "sample points across the window");

  CLI::App* c_sweep =
      app.add_subcommand("sweep", "solve across a range of orders and emit CSV");
  add_file(c_sweep);
  c_sweep->add_option("--family", o.family, "solve as this family instead of the first match");
  c_sweep->add_option("--alpha-from", o.alpha_from, "first order")->required();
  c_sweep->add_option("--alpha-to", o.alpha_to, "last order")->required();
  c_sweep->add_option("--steps", o.steps, "number of orders");
  c_sweep->add_option("--points", o.points, "sample points per trajectory");
  c_sweep->add_option("--out", o.out, "output file ('-' for stdout)");

  CLI::App* c_integrate =
      app.add_subcommand("integrate", "fractional integral of an expression in x");
  c_integrate->add_option("--f", o.f_text, "expression in x")->required();
  c_integrate->add_option("--alpha", o.alpha, "order of the integral");
  c_integrate->add_option("--from", o.from, "lower bound");
  c_integrate->add_option("--to", o.to, "upper bound")->required();

  CLI::App* c_derive =
      app.add_subcommand("derive", "fractional derivative of an expression in x");
  c_derive->add_option("--f", o.f_text, "expression in x")->required();
  c_derive->add_option("--alpha", o.alpha, "order of the derivative");
  c_derive->add_option("--at", o.at, "evaluation point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kBadInput;
  }

  try {
    if (c_classify->parsed()) return cmd_classify(o);
    if (c_solve->parsed()) return cmd_solve(o);
    if (c_verify->parsed()) return cmd_verify(o);
    if (c_sweep->parsed()) return cmd_sweep(o);
    if (c_integrate->parsed()) return cmd_integrate(o);
    if (c_derive->parsed()) return cmd_derive(o);
  } catch (const ProblemFormatError& e) {
    std::cerr << e.what() << "\n";
    return kBadInput;
  } catch (const ParseError& e) {
    std::cerr << "expression: " << e.what() << "\n";
    return kBadInput;
  } catch (const UnsupportedForm& e) {
    std::cerr << e.what() << "\n";
    return kUnsupportedFamily;
  } catch (const DegenerateCase& e) {
    std::cerr << e.what() << "\n";
    return kDegenerate;
  } catch (const SolverError& e) {
    std::cerr << e.what() << "\n";
    return kDegenerate;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kBadInput;
  }
  return kOk;
}
