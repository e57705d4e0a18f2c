#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "f2s/tensor.hpp"

namespace f2s {

// A named view into a parameter's flattened storage (row-major for
// matrices). The pointer must stay valid for the binding's lifetime.
struct ParamBinding {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moment accumulators plus the shared step
// counter. Single-owner, single-threaded.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return t_; }

 private:
  friend void adam_step(std::span<const ParamBinding> params,
                        const std::function<std::span<const double>(const std::string&)>& grad,
                        AdamState& state);
  struct Moments {
    std::vector<double> m, v;
  };
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> slots_;
};

// One bias-corrected Adam update over the whole parameter set:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
// `grad(name)` must return the flattened gradient for every binding. Any
// non-finite gradient aborts the step (no parameter touched) with a
// diagnostic naming the parameter. Updated parameters are re-quantized to
// the 32-bit lattice so serialized checkpoints reproduce them exactly.
void adam_step(std::span<const ParamBinding> params,
               const std::function<std::span<const double>(const std::string&)>& grad,
               AdamState& state);

}  // namespace f2s
