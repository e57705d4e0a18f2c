#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "f2s/record.hpp"
#include "f2s/training.hpp"

namespace f2s {

// Spearman rank correlation: Pearson correlation of average (fractional)
// ranks, ties sharing the mean of their rank positions. Throws DataError for
// n < 2 or a constant list (undefined correlation is reported, never NaN).
double srcc(std::span<const double> a, std::span<const double> b);

struct AttributeMetrics {
  std::string name;
  std::optional<double> srcc;  // absent when labels are missing/degenerate
  std::optional<double> mse;
  double mean_contribution = 0.0;
  double std_contribution = 0.0;
};

struct EvaluationReport {
  double overall_srcc = 0.0;
  double overall_mse = 0.0;
  std::vector<AttributeMetrics> attributes;  // one row per head ("extra" last)
  std::size_t sample_count = 0;
  std::string mode;  // config echo
  std::uint64_t seed = 0;
};

// forward_full per record (checkpoint normalizer applied), overall SRCC/MSE
// against labels, per-attribute SRCC/MSE where labels exist, contribution
// statistics per head. `threads` caps the forward-pass workers; reductions
// are single-threaded in index order, so results do not depend on it.
EvaluationReport evaluate(std::span<const FeatureRecord> records, const Checkpoint& ckpt,
                          std::size_t threads = 1);

void write_report_json(const std::filesystem::path& path, const EvaluationReport& r);
// Flat per-attribute table: attribute,srcc,mse,mean_contribution.
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& r);

struct AblationVariant {
  enum class Kind { kComplete, kAblate, kNone };
  Kind kind = Kind::kComplete;
  std::string attr;  // set for kAblate

  // "complete", "none", or "attr:<name>".
  static AblationVariant parse(const std::string& s);
  std::string label() const;
};

struct AblationRow {
  std::string variant;
  EvaluationReport report;
  double mean_attr_srcc = 0.0;  // over named attributes with labels
};

// Substitutes the named attribute's features (or all of them, for none) with
// the global vector, re-derives dims, retrains from scratch with the same
// seed/config, and evaluates on the equally substituted test records.
AblationRow ablate(std::span<const FeatureRecord> train_records,
                   std::span<const FeatureRecord> test_records, const ModelConfig& model_cfg,
                   const TrainConfig& train_cfg, const AblationVariant& variant,
                   std::size_t threads = 1);

struct Inspection {
  std::string id;
  std::vector<std::string> names;  // head names; "extra" last when present
  Tensor1 S;
  Tensor1 C;
  double overall = 0.0;
};

// Per-image breakdown (the bar-plot data series: scores and contributions).
Inspection inspect(const FeatureRecord& rec, const Checkpoint& ckpt);
void write_inspection_json(const std::filesystem::path& path, const Inspection& ins);

}  // namespace f2s
