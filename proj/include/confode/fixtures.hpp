#pragma once

#include <string>
#include <vector>

#include "confode/classify.hpp"

namespace confode {

// Worked examples used as the regression corpus.  Each entry can be rebuilt
// at any order in (0, 1], so the suite runs both at its default order and at
// the classical limit alpha = 1.
struct Fixture {
  std::string id;
  OdeProblem problem;       // carries alpha, initial condition, window
  std::string family;       // tag the classifier is expected to report
  std::string display;      // closed-form relation at the default alpha
  std::vector<std::string> variants;  // arbitration axes resolved by verify
  std::string note;
};

// All eleven fixtures at their default orders.
const std::vector<Fixture>& fixture_suite();

// One fixture rebuilt at the requested order; id must exist.
Fixture make_fixture(const std::string& id, double alpha);

const Fixture& fixture(const std::string& id);

}  // namespace confode
