#include "f2s/adam.hpp"

#include <cmath>

namespace f2s {

void adam_step(std::span<const ParamBinding> params,
               const std::function<std::span<const double>(const std::string&)>& grad,
               AdamState& state) {
  // Validate every gradient before mutating anything so a bad step is a
  // no-op rather than a partial update.
  for (const ParamBinding& p : params) {
    std::span<const double> g = grad(p.name);
    if (g.size() != p.size) {
      throw InternalError("adam: gradient for " + p.name + " has length " +
                          std::to_string(g.size()) + ", expected " + std::to_string(p.size));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw DataError("adam: non-finite gradient for parameter " + p.name);
      }
    }
  }

  state.t_ += 1;
  const AdamConfig& c = state.cfg_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t_));
  for (const ParamBinding& p : params) {
    AdamState::Moments& mom = state.slots_[p.name];
    if (mom.m.empty()) {
      mom.m.assign(p.size, 0.0);
      mom.v.assign(p.size, 0.0);
    } else if (mom.m.size() != p.size) {
      throw InternalError("adam: parameter " + p.name + " changed size");
    }
    std::span<const double> g = grad(p.name);
    for (std::size_t i = 0; i < p.size; ++i) {
      mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g[i];
      mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = mom.m[i] / bc1;
      const double v_hat = mom.v[i] / bc2;
      p.data[i] = quantize_f32(p.data[i] - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

}  // namespace f2s
