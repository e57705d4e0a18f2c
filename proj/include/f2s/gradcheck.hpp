#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "f2s/adam.hpp"

namespace f2s {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central-difference check of analytic gradients.
//
// `f` evaluates the scalar objective at the parameters' current values;
// `params` are live bindings into the storage `f` reads. Each coordinate is
// perturbed by ±step (then restored) and the central difference is compared
// against `analytic` (names absent from the map are taken as zero, which is
// what a parameter absent from the graph must produce). Relative error per
// coordinate is |analytic − central| / max(|analytic|, |central|, 1e-8).
// Throws DataError if f evaluates non-finite.
GradCheckResult grad_check(const std::function<double()>& f,
                           std::span<const ParamBinding> params,
                           const std::map<std::string, std::vector<double>>& analytic,
                           double step = 1e-3);

}  // namespace f2s
