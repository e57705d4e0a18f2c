#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "f2s/adam.hpp"
#include "f2s/record.hpp"
#include "f2s/rng.hpp"
#include "f2s/tape.hpp"
#include "f2s/tensor.hpp"

namespace f2s {

// Ascending score buckets s_1..s_{N_b}. With the 1/N_b convention below,
// model scores live in [s_1/N_b, s_{N_b}/N_b].
struct BucketGrid {
  std::vector<double> s;

  // Buckets lo, lo+1, ..., hi inclusive.
  static BucketGrid integer_range(int lo, int hi);

  std::size_t size() const { return s.size(); }
  double score_min() const { return s.front() / static_cast<double>(s.size()); }
  double score_max() const { return s.back() / static_cast<double>(s.size()); }
  void validate() const;  // strictly ascending, at least two buckets

  bool operator==(const BucketGrid&) const = default;
};

// Probability mass over the grid buckets.
struct ScoreDistribution {
  Tensor1 p;
};

// Target side of the semi-supervised attribute term: the predicted overall
// with gradients stopped (default), or the ground-truth overall.
enum class SemiTarget { kPredictedStopGrad, kGroundTruth };

struct ModelConfig {
  std::vector<std::string> attribute_names;  // the A named attributes, ordered
  std::vector<std::size_t> attr_dims;        // parallel to attribute_names
  std::size_t global_dim = 0;
  bool include_extra = true;  // the catch-all head for unmodeled attributes
  std::size_t hidden = 128;
  BucketGrid grid = BucketGrid::integer_range(1, 10);
  double lambda = 1.0;
  double sigma = 1.0;

  std::size_t num_attrs() const { return attribute_names.size(); }
  std::size_t num_heads() const { return num_attrs() + (include_extra ? 1 : 0); }
  std::size_t mixed_dim() const;
  // Heads 0..A-1 take [mixed ‖ attr_i]; head A (extra) takes [global ‖ mixed].
  std::size_t head_input_dim(std::size_t head) const;
  void validate() const;
};

// One scoring head: input -> hidden (rectified) -> bucket logits.
struct HeadParams {
  Tensor2 W1;
  Tensor1 b1;
  Tensor2 W2;
  Tensor1 b2;
};

struct F2SParams {
  std::vector<HeadParams> heads;  // length num_heads; extra head last
  Tensor2 Wc;                     // contribution layer over the mixed vector
  Tensor1 bc;
  Tensor1 x;                      // prior logits, length num_heads
};

// Seeded uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases, zero prior
// logits; everything lands on the 32-bit lattice. Draw order is fixed:
// heads in order (W1 row-major, then W2), then the contribution layer.
F2SParams init_params(const ModelConfig& cfg, Rng& rng);

// Flattened named views in checkpoint order: headK.{W1,b1,W2,b2} for
// ascending K, then contrib.{Wc,bc}, then prior.x.
std::vector<ParamBinding> param_bindings(F2SParams& p);

struct Prediction {
  std::vector<ScoreDistribution> dists;  // per head
  Tensor1 S;                             // per-head scores
  Tensor1 C;                             // contributions (simplex)
  double overall = 0.0;
};

// [global ‖ attr_1 ‖ ... ‖ attr_A], with dims checked against the config.
Tensor1 assemble_mixed(const ModelConfig& cfg, const Tensor1& global_feat,
                       std::span<const Tensor1* const> attr_feats);

ScoreDistribution attribute_head_forward(const Tensor1& mixed, const Tensor1& attr_feat,
                                         const HeadParams& head);
ScoreDistribution extra_head_forward(const Tensor1& global_feat, const Tensor1& mixed,
                                     const HeadParams& head);

// S = (1/N_b) * Σ p_i s_i (the 1/N_b factor is part of the convention).
double score_from_distribution(const ScoreDistribution& d, const BucketGrid& grid);

// C = softmax(Wc·mixed + bc).
Tensor1 contributions(const Tensor1& mixed, const Tensor2& Wc, const Tensor1& bc);

// Σ S_i C_i.
double overall_score(const Tensor1& S, const Tensor1& C);

// w = softmax(sigmoid(x) + sigma). Since sigmoid ∈ (0,1), max(w)/min(w) < e.
Tensor1 prior_weights(const Tensor1& x, double sigma);

// (S_overall − gt)² + λ Σ_i (S_i C_i − target·w_i)², target per SemiTarget.
double loss_semi(const Prediction& pred, double gt_overall, const Tensor1& w, double lambda,
                 const BucketGrid& grid, SemiTarget target = SemiTarget::kPredictedStopGrad);

// Same loss with the attribute-term target pinned to an explicit value —
// the stop-gradient objective evaluated as a plain function (what a
// finite-difference check of the stop-gradient variant must perturb).
double loss_semi_with_target(const Prediction& pred, double gt_overall, const Tensor1& w,
                             double lambda, const BucketGrid& grid, double target_value);

// (S_overall − gt)² + λ Σ_{i<A} (S_i − GT_i)²; the extra head is excluded.
double loss_supervised(const Prediction& pred, double gt_overall, const Tensor1& gt_attrs,
                       double lambda, const BucketGrid& grid);

// Full eager pass over an (already normalized) record.
Prediction forward_full(const FeatureRecord& rec, const F2SParams& params,
                        const ModelConfig& cfg);

// ---- taped (training) path ----
// Parameters are registered once per tape; per-sample graphs share them, so
// batch gradients accumulate naturally. Taped forwards mirror the eager
// kernels bit for bit.

struct TapedParams {
  struct Head {
    GradTape::Value W1, b1, W2, b2;
  };
  std::vector<Head> heads;
  GradTape::Value Wc, bc;
  GradTape::Value x;
  bool has_prior = false;
};

// with_prior registers the prior logits (the semi loss needs them iff λ>0;
// leaving them off the tape is what makes their gradient exactly zero).
TapedParams register_params(GradTape& tape, const F2SParams& p, const ModelConfig& cfg,
                            bool with_prior);

struct TapedForward {
  std::vector<GradTape::Value> S_each;  // per-head scalar scores
  GradTape::Value S;                    // the same, stacked
  GradTape::Value C;
  GradTape::Value overall;
};

TapedForward taped_forward(GradTape& tape, const TapedParams& tp, const ModelConfig& cfg,
                           const FeatureRecord& rec);

GradTape::Value taped_semi_loss(GradTape& tape, const TapedParams& tp, const TapedForward& fwd,
                                const ModelConfig& cfg, double gt_overall, SemiTarget target);
GradTape::Value taped_supervised_loss(GradTape& tape, const TapedForward& fwd,
                                      const ModelConfig& cfg, double gt_overall,
                                      const Tensor1& gt_attrs);

}  // namespace f2s
