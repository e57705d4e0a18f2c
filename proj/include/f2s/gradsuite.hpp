#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "f2s/gradcheck.hpp"

namespace f2s {

// One pinned gradient-check configuration: a freshly initialized model of the
// given shape, a random record and random labels, checked for both loss modes.
struct GradSuiteCase {
  std::uint64_t seed = 0;
  std::size_t num_attrs = 2;
  std::size_t attr_dim = 4;
  std::size_t global_dim = 4;
  std::size_t buckets = 10;
  std::size_t hidden = 6;
};

// The 20 stock configurations: attrs in {2,4,8} crossed with attribute and
// global widths in {4,16} and 10- or 11-bucket grids, truncated to 20, with
// sequential seeds starting at seed_base.
std::vector<GradSuiteCase> default_grad_suite(std::uint64_t seed_base = 1000);

struct GradSuiteCaseResult {
  GradSuiteCase config;
  double semi_error = 0.0;        // worst relative error, semi-supervised loss
  double supervised_error = 0.0;  // worst relative error, supervised loss
  std::string worst_param;        // coordinate behind the larger of the two
};

struct GradSuiteResult {
  double max_rel_error = 0.0;
  std::vector<GradSuiteCaseResult> cases;
};

// Runs every case: analytic gradients from the tape against central
// differences of the matching eager objective. The semi-supervised check
// alternates the attribute-term target between the stopped prediction (the
// objective is then evaluated with the target frozen at its base value) and
// the ground truth. Parameters absent from a tape are required to have an
// exactly-zero numeric gradient.
GradSuiteResult run_grad_suite(std::span<const GradSuiteCase> cases, double step = 1e-3);

}  // namespace f2s
