#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "f2s/tensor.hpp"

namespace f2s {

// One sample: overall label in model score units, optional per-attribute
// labels (evaluation / supervised training only), and named feature
// vectors. The name "global" is reserved for the global feature.
struct FeatureRecord {
  std::string id;
  double overall = 0.0;
  std::map<std::string, double> attr_labels;
  std::map<std::string, Tensor1> features;

  // Throws DataError naming the record and feature when absent.
  const Tensor1& feature(const std::string& name) const;
};

// Optional per-dimension standardization of named feature vectors.
// Statistics come from the training split, are quantized to 32-bit (they
// travel in the checkpoint), and are re-applied identically at evaluation.
class FeatureNormalizer {
 public:
  struct Stats {
    Tensor1 mean;
    Tensor1 std;  // population std; entries below 1e-6 are replaced by 1
  };

  FeatureNormalizer() = default;  // disabled: apply() is the identity

  // Fits mean/std per (name, dimension) over `records` for each name in
  // `names`. Every record must carry every name with a consistent length.
  static FeatureNormalizer fit(std::span<const FeatureRecord> records,
                               std::span<const std::string> names);

  bool enabled() const { return enabled_; }
  Tensor1 apply(const std::string& name, const Tensor1& v) const;
  FeatureRecord apply(const FeatureRecord& rec) const;

  const std::map<std::string, Stats>& stats() const { return stats_; }
  // Restores a fitted normalizer (checkpoint load). Empty map = disabled.
  void set_stats(std::map<std::string, Stats> s);

 private:
  bool enabled_ = false;
  std::map<std::string, Stats> stats_;
};

}  // namespace f2s
