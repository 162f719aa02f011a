#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calibdr/losses.hpp"

namespace calibdr {

struct CheckOptions {
  bool quick = false;  // skip the million-draw sampling and truth checks
  std::uint64_t seed = 97;
  // Fault injection for exercising the failure path: perturbs the analytic
  // gradient of every loss whose label starts with this prefix.
  std::string corrupt_gradient;
};

struct CheckLine {
  std::string name;
  bool pass = false;
  double observed = 0.0;  // the quantity compared against the bound
  double bound = 0.0;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckLine> lines;
  bool all_pass() const;
};

// Self-verification battery: finite-difference gradient checks for every
// loss, optimality certificates on random penalized fits (plus the implied
// inverse-probability identities for the calibrated losses), the analytic
// standardization constants against direct quadrature, and million-draw
// recomputations of the sampling moments and frozen logistic truth values.
CheckReport run_checks(const CheckOptions& options = {});

}  // namespace calibdr
