#include "f2s/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "f2s/error.hpp"

namespace f2s {

GradCheckResult grad_check(const std::function<double()>& f,
                           std::span<const ParamBinding> params,
                           const std::map<std::string, std::vector<double>>& analytic,
                           double step) {
  auto eval = [&](const std::string& where) {
    double y = f();
    if (!std::isfinite(y)) throw DataError("grad_check: non-finite objective at " + where);
    return y;
  };

  GradCheckResult res;
  for (const ParamBinding& p : params) {
    auto it = analytic.find(p.name);
    if (it != analytic.end() && it->second.size() != p.size) {
      throw InternalError("grad_check: analytic gradient for " + p.name + " has length " +
                          std::to_string(it->second.size()) + ", expected " +
                          std::to_string(p.size));
    }
    for (std::size_t i = 0; i < p.size; ++i) {
      const double orig = p.data[i];
      p.data[i] = orig + step;
      const double fp = eval(p.name + "[+]");
      p.data[i] = orig - step;
      const double fm = eval(p.name + "[-]");
      p.data[i] = orig;
      const double central = (fp - fm) / (2.0 * step);
      const double a = it != analytic.end() ? it->second[i] : 0.0;
      const double rel =
          std::abs(a - central) / std::max({std::abs(a), std::abs(central), 1e-8});
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p.name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace f2s
