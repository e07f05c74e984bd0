#include "confode/problem_io.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace confode {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, int line_no, const std::string& key) {
  const std::string t = trim(text);
  const char* begin = t.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ProblemFormatError("line " + std::to_string(line_no) + ": value of '" + key +
                             "' is not a number: '" + t + "'");
  return v;
}

std::pair<double, double> parse_pair(const std::string& text, int line_no,
                                     const std::string& key) {
  std::size_t comma = text.find(',');
  if (comma == std::string::npos)
    throw ProblemFormatError("line " + std::to_string(line_no) + ": '" + key +
                             "' needs two comma-separated numbers");
  return {parse_number(text.substr(0, comma), line_no, key),
          parse_number(text.substr(comma + 1), line_no, key)};
}

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

ProblemFile parse_problem_text(const std::string& text) {
  ProblemFile pf;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ProblemFormatError("line " + std::to_string(line_no) +
                               ": expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ProblemFormatError("line " + std::to_string(line_no) +
                               ": empty key or value");
    if (!seen.insert(key).second)
      throw ProblemFormatError("line " + std::to_string(line_no) + ": duplicate key '" +
                               key + "'");

    if (key == "alpha") {
      pf.alpha = parse_number(value, line_no, key);
    } else if (key == "rhs") {
      pf.rhs = value;
    } else if (key == "M") {
      pf.M = value;
    } else if (key == "N") {
      pf.N = value;
    } else if (key == "ic") {
      pf.ic = parse_pair(value, line_no, key);
    } else if (key == "window") {
      pf.window = parse_pair(value, line_no, key);
    } else if (key == "m" || key == "n" || key == "r" || key == "beta") {
      pf.params[key] = parse_number(value, line_no, key);
    } else {
      throw ProblemFormatError("line " + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
    }
  }

  if (!seen.count("alpha")) throw ProblemFormatError("missing required key 'alpha'");
  const bool normal = pf.rhs.has_value();
  const bool differential = pf.M.has_value() || pf.N.has_value();
  if (normal == differential)
    throw ProblemFormatError("give either 'rhs' or both 'M' and 'N'");
  if (differential && !(pf.M && pf.N))
    throw ProblemFormatError("differential form needs both 'M' and 'N'");
  return pf;
}

ProblemFile load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProblemFormatError("cannot open problem file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_problem_text(buf.str());
  } catch (const ProblemFormatError& e) {
    throw ProblemFormatError(path + ": " + e.what());
  }
}

std::string substitute_params(const std::string& expr_text, const ProblemFile& pf) {
  std::map<std::string, double> values = pf.params;
  values["alpha"] = pf.alpha;

  std::string out;
  out.reserve(expr_text.size());
  std::size_t i = 0;
  while (i < expr_text.size()) {
    char c = expr_text[i];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < expr_text.size() && ident_char(expr_text[j])) ++j;
      std::string name = expr_text.substr(i, j - i);
      auto it = values.find(name);
      if (it != values.end()) {
        out += '(';
        out += format_double(it->second);
        out += ')';
      } else {
        out += name;
      }
      i = j;
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

OdeProblem to_problem(const ProblemFile& pf) {
  if (!(pf.alpha > 0.0 && pf.alpha <= 1.0))
    throw ProblemFormatError("alpha must lie in (0, 1], got " + format_double(pf.alpha));
  if (pf.window && !(pf.window->first < pf.window->second))
    throw ProblemFormatError("window must be an increasing pair");

  auto parse_field = [&](const std::string& text, const char* key) {
    try {
      return simplify(parse(substitute_params(text, pf)));
    } catch (const ParseError& e) {
      throw ProblemFormatError(std::string(key) + ": " + e.what());
    }
  };

  OdeProblem p;
  if (pf.rhs) {
    p = OdeProblem::normal(parse_field(*pf.rhs, "rhs"), pf.alpha);
  } else {
    p = OdeProblem::differential(parse_field(*pf.M, "M"), parse_field(*pf.N, "N"),
                                 pf.alpha);
  }
  if (pf.ic) {
    p.x0 = pf.ic->first;
    p.y0 = pf.ic->second;
  }
  if (pf.window) {
    p.window_lo = pf.window->first;
    p.window_hi = pf.window->second;
  }
  return p;
}

OdeProblem load_problem(const std::string& path) {
  return to_problem(load_problem_file(path));
}

}  // namespace confode
