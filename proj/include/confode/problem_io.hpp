#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "confode/classify.hpp"

namespace confode {

// Raised for any problem-file defect: unreadable file, malformed line,
// unknown or duplicate key, missing required field, bad numeric literal.
class ProblemFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key = value text format describing one equation.
//
//   alpha  = 0.5                       required, order of the derivative
//   rhs    = (x^alpha + y)^2           normal form ...
//   M      = x^(1-alpha)*(x + y)       ... or differential form (M and N)
//   N      = -(2*x + 3*y)
//   ic     = 1, 2                      optional start point x0, y0
//   window = 0.5, 3                    optional validity interval
//   m      = 1                         optional named parameters; their
//   beta   = -0.5                      values are spliced into the
//                                      expression strings before parsing
//
// '#' starts a comment.  Exactly one of rhs / M+N must be given.  Parameter
// keys are m, n, r, beta; the key alpha is also visible to expressions.
struct ProblemFile {
  double alpha = 1.0;
  std::optional<std::string> rhs;
  std::optional<std::string> M, N;
  std::optional<std::pair<double, double>> ic;
  std::optional<std::pair<double, double>> window;
  std::map<std::string, double> params;
};

ProblemFile parse_problem_text(const std::string& text);
ProblemFile load_problem_file(const std::string& path);

// Whole-word occurrences of alpha and of each parameter name become their
// numeric values in parentheses; everything else passes through untouched.
std::string substitute_params(const std::string& expr_text, const ProblemFile& pf);

// Parses the expression strings (after substitution) and assembles the
// problem, carrying the initial condition and window along.
OdeProblem to_problem(const ProblemFile& pf);

OdeProblem load_problem(const std::string& path);

}  // namespace confode
