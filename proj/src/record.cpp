#include "f2s/record.hpp"

#include <cmath>

#include "f2s/error.hpp"

namespace f2s {

const Tensor1& FeatureRecord::feature(const std::string& name) const {
  auto it = features.find(name);
  if (it == features.end()) {
    throw DataError("record " + id + ": missing feature \"" + name + "\"");
  }
  return it->second;
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeatureRecord> records,
                                         std::span<const std::string> names) {
  if (records.empty()) throw DataError("normalizer: no records to fit");
  FeatureNormalizer out;
  out.enabled_ = true;
  for (const std::string& name : names) {
    const std::size_t dim = records.front().feature(name).size();
    Tensor1 mean(dim), var(dim);
    for (const FeatureRecord& r : records) {
      const Tensor1& v = r.feature(name);
      if (v.size() != dim) {
        throw DataError("record " + r.id + ": feature \"" + name + "\" has length " +
                        std::to_string(v.size()) + ", expected " + std::to_string(dim));
      }
      for (std::size_t d = 0; d < dim; ++d) mean[d] += v[d];
    }
    const double n = static_cast<double>(records.size());
    for (std::size_t d = 0; d < dim; ++d) mean[d] /= n;
    for (const FeatureRecord& r : records) {
      const Tensor1& v = r.feature(name);
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = v[d] - mean[d];
        var[d] += c * c;
      }
    }
    Stats st;
    st.mean = std::move(mean);
    st.std = Tensor1(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      const double s = std::sqrt(var[d] / n);
      st.std[d] = s < 1e-6 ? 1.0 : s;
    }
    quantize_f32(st.mean);
    quantize_f32(st.std);
    out.stats_[name] = std::move(st);
  }
  return out;
}

Tensor1 FeatureNormalizer::apply(const std::string& name, const Tensor1& v) const {
  if (!enabled_) return v;
  auto it = stats_.find(name);
  if (it == stats_.end()) return v;
  const Stats& st = it->second;
  if (st.mean.size() != v.size()) {
    throw DataError("normalizer: feature \"" + name + "\" has length " +
                    std::to_string(v.size()) + ", statistics cover " +
                    std::to_string(st.mean.size()));
  }
  Tensor1 out(v.size());
  for (std::size_t d = 0; d < v.size(); ++d) out[d] = (v[d] - st.mean[d]) / st.std[d];
  return out;
}

FeatureRecord FeatureNormalizer::apply(const FeatureRecord& rec) const {
  if (!enabled_) return rec;
  FeatureRecord out = rec;
  for (auto& [name, v] : out.features) v = apply(name, v);
  return out;
}

void FeatureNormalizer::set_stats(std::map<std::string, Stats> s) {
  stats_ = std::move(s);
  enabled_ = !stats_.empty();
}

}  // namespace f2s
