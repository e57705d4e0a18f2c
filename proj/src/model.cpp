#include "f2s/model.hpp"

#include <array>
#include <cmath>
#include <set>

namespace f2s {

BucketGrid BucketGrid::integer_range(int lo, int hi) {
  BucketGrid g;
  for (int v = lo; v <= hi; ++v) g.s.push_back(static_cast<double>(v));
  g.validate();
  return g;
}

void BucketGrid::validate() const {
  if (s.size() < 2) throw ConfigError("bucket grid: need at least 2 buckets");
  require_finite(std::span<const double>(s), "bucket grid");
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i] > s[i - 1])) {
      throw ConfigError("bucket grid: scores must be strictly ascending (violated at index " +
                        std::to_string(i) + ")");
    }
  }
}

std::size_t ModelConfig::mixed_dim() const {
  std::size_t n = global_dim;
  for (std::size_t d : attr_dims) n += d;
  return n;
}

std::size_t ModelConfig::head_input_dim(std::size_t head) const {
  if (head < num_attrs()) return mixed_dim() + attr_dims[head];
  if (include_extra && head == num_attrs()) return global_dim + mixed_dim();
  throw ConfigError("head index " + std::to_string(head) + " out of range");
}

void ModelConfig::validate() const {
  if (attribute_names.size() != attr_dims.size()) {
    throw ConfigError("model config: " + std::to_string(attribute_names.size()) +
                      " attribute names but " + std::to_string(attr_dims.size()) + " dims");
  }
  if (num_heads() < 1) throw ConfigError("model config: need at least one head");
  if (global_dim == 0) throw ConfigError("model config: global feature dim must be positive");
  if (hidden == 0) throw ConfigError("model config: hidden width must be positive");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < attribute_names.size(); ++i) {
    const std::string& name = attribute_names[i];
    if (name.empty()) throw ConfigError("model config: empty attribute name");
    if (name == "global") throw ConfigError("model config: \"global\" is a reserved name");
    if (!seen.insert(name).second) {
      throw ConfigError("model config: duplicate attribute name \"" + name + "\"");
    }
    if (attr_dims[i] == 0) {
      throw ConfigError("model config: attribute \"" + name + "\" has dim 0");
    }
  }
  grid.validate();
  if (!(lambda >= 0.0)) throw ConfigError("model config: lambda must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("model config: sigma must be > 0");
}

namespace {

Tensor2 glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor2 W(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) W.at(i, j) = rng.uniform(-limit, limit);
  return W;
}

void check_overall_range(double gt, const BucketGrid& grid) {
  // The negated comparison also rejects NaN.
  if (!(gt >= grid.score_min() && gt <= grid.score_max())) {
    throw DataError("overall label " + std::to_string(gt) + " outside model score range [" +
                    std::to_string(grid.score_min()) + ", " + std::to_string(grid.score_max()) +
                    "]");
  }
}

void check_record_dims(const ModelConfig& cfg, const Tensor1& global_feat,
                       std::span<const Tensor1* const> attr_feats) {
  if (global_feat.size() != cfg.global_dim) {
    throw DataError("feature \"global\" has length " + std::to_string(global_feat.size()) +
                    ", expected " + std::to_string(cfg.global_dim));
  }
  if (attr_feats.size() != cfg.num_attrs()) {
    throw DataError("got " + std::to_string(attr_feats.size()) +
                    " attribute features, expected " + std::to_string(cfg.num_attrs()));
  }
  for (std::size_t i = 0; i < attr_feats.size(); ++i) {
    if (attr_feats[i] == nullptr) {
      throw DataError("missing attribute feature \"" + cfg.attribute_names[i] + "\"");
    }
    if (attr_feats[i]->size() != cfg.attr_dims[i]) {
      throw DataError("attribute feature \"" + cfg.attribute_names[i] + "\" has length " +
                      std::to_string(attr_feats[i]->size()) + ", expected " +
                      std::to_string(cfg.attr_dims[i]));
    }
  }
}

ScoreDistribution head_forward(const Tensor1& input, const HeadParams& head) {
  return {softmax(linear_forward(relu(linear_forward(input, head.W1, head.b1)), head.W2,
                                 head.b2))};
}

}  // namespace

F2SParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  F2SParams p;
  const std::size_t nb = cfg.grid.size();
  p.heads.reserve(cfg.num_heads());
  for (std::size_t h = 0; h < cfg.num_heads(); ++h) {
    HeadParams head;
    head.W1 = glorot_uniform(cfg.hidden, cfg.head_input_dim(h), rng);
    head.b1 = Tensor1(cfg.hidden);
    head.W2 = glorot_uniform(nb, cfg.hidden, rng);
    head.b2 = Tensor1(nb);
    p.heads.push_back(std::move(head));
  }
  p.Wc = glorot_uniform(cfg.num_heads(), cfg.mixed_dim(), rng);
  p.bc = Tensor1(cfg.num_heads());
  p.x = Tensor1(cfg.num_heads());
  for (HeadParams& h : p.heads) {
    quantize_f32(h.W1);
    quantize_f32(h.W2);
  }
  quantize_f32(p.Wc);
  return p;
}

std::vector<ParamBinding> param_bindings(F2SParams& p) {
  std::vector<ParamBinding> out;
  out.reserve(4 * p.heads.size() + 3);
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    const std::string k = "head" + std::to_string(h);
    out.push_back({k + ".W1", p.heads[h].W1.data(), p.heads[h].W1.size()});
    out.push_back({k + ".b1", p.heads[h].b1.data(), p.heads[h].b1.size()});
    out.push_back({k + ".W2", p.heads[h].W2.data(), p.heads[h].W2.size()});
    out.push_back({k + ".b2", p.heads[h].b2.data(), p.heads[h].b2.size()});
  }
  out.push_back({"contrib.Wc", p.Wc.data(), p.Wc.size()});
  out.push_back({"contrib.bc", p.bc.data(), p.bc.size()});
  out.push_back({"prior.x", p.x.data(), p.x.size()});
  return out;
}

Tensor1 assemble_mixed(const ModelConfig& cfg, const Tensor1& global_feat,
                       std::span<const Tensor1* const> attr_feats) {
  check_record_dims(cfg, global_feat, attr_feats);
  std::vector<const Tensor1*> parts;
  parts.reserve(attr_feats.size() + 1);
  parts.push_back(&global_feat);
  for (const Tensor1* a : attr_feats) parts.push_back(a);
  return concat(std::span<const Tensor1* const>(parts));
}

ScoreDistribution attribute_head_forward(const Tensor1& mixed, const Tensor1& attr_feat,
                                         const HeadParams& head) {
  return head_forward(concat(mixed, attr_feat), head);
}

ScoreDistribution extra_head_forward(const Tensor1& global_feat, const Tensor1& mixed,
                                     const HeadParams& head) {
  return head_forward(concat(global_feat, mixed), head);
}

double score_from_distribution(const ScoreDistribution& d, const BucketGrid& grid) {
  if (d.p.size() != grid.size()) {
    throw ConfigError("score: distribution has " + std::to_string(d.p.size()) +
                      " buckets, grid has " + std::to_string(grid.size()));
  }
  return dot(d.p, Tensor1(grid.s)) * (1.0 / static_cast<double>(grid.size()));
}

Tensor1 contributions(const Tensor1& mixed, const Tensor2& Wc, const Tensor1& bc) {
  return softmax(linear_forward(mixed, Wc, bc));
}

double overall_score(const Tensor1& S, const Tensor1& C) { return dot(S, C); }

Tensor1 prior_weights(const Tensor1& x, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("prior: sigma must be > 0");
  require_finite(x, "prior logits");
  Tensor1 t = sigmoid(x);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = t[i] + sigma;
  return softmax(t);
}

double loss_semi_with_target(const Prediction& pred, double gt_overall, const Tensor1& w,
                             double lambda, const BucketGrid& grid, double target_value) {
  check_overall_range(gt_overall, grid);
  if (!(lambda >= 0.0)) throw ConfigError("loss: lambda must be >= 0");
  const double d_ov = pred.overall - gt_overall;
  const double l_ov = d_ov * d_ov;
  if (lambda == 0.0) return l_ov;
  if (w.size() != pred.S.size() || pred.C.size() != pred.S.size()) {
    throw ConfigError("loss: S (" + std::to_string(pred.S.size()) + "), C (" +
                      std::to_string(pred.C.size()) + ") and w (" + std::to_string(w.size()) +
                      ") lengths disagree");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.S.size(); ++i) {
    const double d = pred.S[i] * pred.C[i] - target_value * w[i];
    acc += d * d;
  }
  return l_ov + lambda * acc;
}

double loss_semi(const Prediction& pred, double gt_overall, const Tensor1& w, double lambda,
                 const BucketGrid& grid, SemiTarget target) {
  const double tgt = target == SemiTarget::kGroundTruth ? gt_overall : pred.overall;
  return loss_semi_with_target(pred, gt_overall, w, lambda, grid, tgt);
}

double loss_supervised(const Prediction& pred, double gt_overall, const Tensor1& gt_attrs,
                       double lambda, const BucketGrid& grid) {
  check_overall_range(gt_overall, grid);
  if (!(lambda >= 0.0)) throw ConfigError("loss: lambda must be >= 0");
  if (gt_attrs.size() > pred.S.size()) {
    throw DataError("supervised loss: " + std::to_string(gt_attrs.size()) +
                    " attribute labels but only " + std::to_string(pred.S.size()) + " heads");
  }
  const double d_ov = pred.overall - gt_overall;
  const double l_ov = d_ov * d_ov;
  if (lambda == 0.0) return l_ov;
  double acc = 0.0;
  for (std::size_t i = 0; i < gt_attrs.size(); ++i) {
    const double d = pred.S[i] - gt_attrs[i];
    acc += d * d;
  }
  return l_ov + lambda * acc;
}

Prediction forward_full(const FeatureRecord& rec, const F2SParams& params,
                        const ModelConfig& cfg) {
  if (params.heads.size() != cfg.num_heads()) {
    throw ConfigError("params have " + std::to_string(params.heads.size()) +
                      " heads, config expects " + std::to_string(cfg.num_heads()));
  }
  const Tensor1& gfeat = rec.feature("global");
  std::vector<const Tensor1*> attrs;
  attrs.reserve(cfg.num_attrs());
  for (const std::string& name : cfg.attribute_names) attrs.push_back(&rec.feature(name));
  const Tensor1 mixed =
      assemble_mixed(cfg, gfeat, std::span<const Tensor1* const>(attrs));

  Prediction pred;
  pred.dists.reserve(cfg.num_heads());
  for (std::size_t i = 0; i < cfg.num_attrs(); ++i) {
    pred.dists.push_back(attribute_head_forward(mixed, *attrs[i], params.heads[i]));
  }
  if (cfg.include_extra) {
    pred.dists.push_back(extra_head_forward(gfeat, mixed, params.heads[cfg.num_attrs()]));
  }
  pred.S = Tensor1(cfg.num_heads());
  for (std::size_t i = 0; i < pred.dists.size(); ++i) {
    pred.S[i] = score_from_distribution(pred.dists[i], cfg.grid);
  }
  pred.C = contributions(mixed, params.Wc, params.bc);
  pred.overall = overall_score(pred.S, pred.C);
  return pred;
}

TapedParams register_params(GradTape& tape, const F2SParams& p, const ModelConfig& cfg,
                            bool with_prior) {
  if (p.heads.size() != cfg.num_heads()) {
    throw ConfigError("params have " + std::to_string(p.heads.size()) +
                      " heads, config expects " + std::to_string(cfg.num_heads()));
  }
  TapedParams tp;
  tp.heads.reserve(p.heads.size());
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    const std::string k = "head" + std::to_string(h);
    TapedParams::Head th;
    th.W1 = tape.param(k + ".W1", p.heads[h].W1);
    th.b1 = tape.param(k + ".b1", p.heads[h].b1);
    th.W2 = tape.param(k + ".W2", p.heads[h].W2);
    th.b2 = tape.param(k + ".b2", p.heads[h].b2);
    tp.heads.push_back(th);
  }
  tp.Wc = tape.param("contrib.Wc", p.Wc);
  tp.bc = tape.param("contrib.bc", p.bc);
  if (with_prior) {
    tp.x = tape.param("prior.x", p.x);
    tp.has_prior = true;
  }
  return tp;
}

TapedForward taped_forward(GradTape& tape, const TapedParams& tp, const ModelConfig& cfg,
                           const FeatureRecord& rec) {
  if (tp.heads.size() != cfg.num_heads()) {
    throw InternalError("taped params do not match the config head count");
  }
  const Tensor1& gfeat = rec.feature("global");
  std::vector<const Tensor1*> attrs;
  attrs.reserve(cfg.num_attrs());
  for (const std::string& name : cfg.attribute_names) attrs.push_back(&rec.feature(name));
  check_record_dims(cfg, gfeat, std::span<const Tensor1* const>(attrs));

  const GradTape::Value gv = tape.input(gfeat);
  std::vector<GradTape::Value> parts;
  parts.reserve(attrs.size() + 1);
  parts.push_back(gv);
  std::vector<GradTape::Value> attr_vs;
  attr_vs.reserve(attrs.size());
  for (const Tensor1* a : attrs) {
    attr_vs.push_back(tape.input(*a));
    parts.push_back(attr_vs.back());
  }
  const GradTape::Value mixed = tape.concat(parts);
  const GradTape::Value grid_v = tape.input(std::span<const double>(cfg.grid.s));
  const double inv_nb = 1.0 / static_cast<double>(cfg.grid.size());

  auto head_score = [&](const TapedParams::Head& head, GradTape::Value in) {
    const GradTape::Value a = tape.relu(tape.linear(head.W1, head.b1, in));
    const GradTape::Value p = tape.softmax(tape.linear(head.W2, head.b2, a));
    return tape.scale(tape.dot(p, grid_v), inv_nb);
  };

  TapedForward fwd;
  fwd.S_each.reserve(cfg.num_heads());
  for (std::size_t i = 0; i < cfg.num_attrs(); ++i) {
    const std::array<GradTape::Value, 2> in_parts{mixed, attr_vs[i]};
    fwd.S_each.push_back(head_score(tp.heads[i], tape.concat(in_parts)));
  }
  if (cfg.include_extra) {
    const std::array<GradTape::Value, 2> in_parts{gv, mixed};
    fwd.S_each.push_back(head_score(tp.heads[cfg.num_attrs()], tape.concat(in_parts)));
  }
  fwd.S = tape.concat(fwd.S_each);
  fwd.C = tape.softmax(tape.linear(tp.Wc, tp.bc, mixed));
  fwd.overall = tape.dot(fwd.S, fwd.C);
  return fwd;
}

GradTape::Value taped_semi_loss(GradTape& tape, const TapedParams& tp, const TapedForward& fwd,
                                const ModelConfig& cfg, double gt_overall, SemiTarget target) {
  check_overall_range(gt_overall, cfg.grid);
  const GradTape::Value gt = tape.input_scalar(gt_overall);
  const GradTape::Value l_ov = tape.square(tape.sub(fwd.overall, gt));
  // λ = 0 skips the attribute subgraph entirely, so nothing downstream of
  // the prior (or of S·C) receives even a zero-weighted gradient pass.
  if (cfg.lambda == 0.0) return l_ov;
  if (!tp.has_prior) {
    throw InternalError("semi loss with lambda > 0 requires the prior logits on the tape");
  }
  const GradTape::Value w = tape.softmax(tape.add_scalar(tape.sigmoid(tp.x), cfg.sigma));
  const GradTape::Value target_v =
      target == SemiTarget::kGroundTruth ? gt : tape.stop_grad(fwd.overall);
  std::vector<GradTape::Value> terms;
  terms.reserve(fwd.S_each.size());
  for (std::size_t i = 0; i < fwd.S_each.size(); ++i) {
    const GradTape::Value lhs = tape.mul(fwd.S_each[i], tape.element(fwd.C, i));
    const GradTape::Value rhs = tape.mul(target_v, tape.element(w, i));
    terms.push_back(tape.square(tape.sub(lhs, rhs)));
  }
  const GradTape::Value l_attr = tape.sum(tape.concat(terms));
  return tape.add(l_ov, tape.scale(l_attr, cfg.lambda));
}

GradTape::Value taped_supervised_loss(GradTape& tape, const TapedForward& fwd,
                                      const ModelConfig& cfg, double gt_overall,
                                      const Tensor1& gt_attrs) {
  check_overall_range(gt_overall, cfg.grid);
  if (gt_attrs.size() != cfg.num_attrs()) {
    throw DataError("supervised loss: got " + std::to_string(gt_attrs.size()) +
                    " attribute labels, expected " + std::to_string(cfg.num_attrs()));
  }
  const GradTape::Value gt = tape.input_scalar(gt_overall);
  const GradTape::Value l_ov = tape.square(tape.sub(fwd.overall, gt));
  if (cfg.lambda == 0.0 || gt_attrs.size() == 0) return l_ov;
  std::vector<GradTape::Value> terms;
  terms.reserve(gt_attrs.size());
  for (std::size_t i = 0; i < gt_attrs.size(); ++i) {
    terms.push_back(tape.square(tape.sub(fwd.S_each[i], tape.input_scalar(gt_attrs[i]))));
  }
  const GradTape::Value l_attr = tape.sum(tape.concat(terms));
  return tape.add(l_ov, tape.scale(l_attr, cfg.lambda));
}

}  // namespace f2s
