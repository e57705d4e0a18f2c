#include "f2s/gradsuite.hpp"

#include <algorithm>
#include <map>

#include "f2s/model.hpp"
#include "f2s/record.hpp"
#include "f2s/rng.hpp"

namespace f2s {

std::vector<GradSuiteCase> default_grad_suite(std::uint64_t seed_base) {
  std::vector<GradSuiteCase> out;
  for (std::size_t attrs : {2, 4, 8}) {
    for (std::size_t attr_dim : {4, 16}) {
      for (std::size_t global_dim : {4, 16}) {
        for (std::size_t buckets : {10, 11}) {
          GradSuiteCase c;
          c.seed = seed_base + out.size();
          c.num_attrs = attrs;
          c.attr_dim = attr_dim;
          c.global_dim = global_dim;
          c.buckets = buckets;
          c.hidden = 6;
          out.push_back(c);
        }
      }
    }
  }
  out.resize(20);
  return out;
}

namespace {

ModelConfig make_config(const GradSuiteCase& c) {
  ModelConfig cfg;
  for (std::size_t i = 0; i < c.num_attrs; ++i) {
    cfg.attribute_names.push_back("attr" + std::to_string(i + 1));
    cfg.attr_dims.push_back(c.attr_dim);
  }
  cfg.global_dim = c.global_dim;
  cfg.include_extra = true;
  cfg.hidden = c.hidden;
  cfg.grid = c.buckets == 10 ? BucketGrid::integer_range(1, 10) : BucketGrid::integer_range(0, 10);
  cfg.lambda = 1.0;
  cfg.sigma = 1.0;
  cfg.validate();
  return cfg;
}

Tensor1 random_vector(std::size_t n, Rng& rng) {
  Tensor1 v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = quantize_f32(rng.uniform(-1.0, 1.0));
  return v;
}

std::map<std::string, std::vector<double>> collect_grads(const GradTape& tape,
                                                         std::span<const ParamBinding> bindings) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& b : bindings) {
    if (tape.has_param(b.name)) out[b.name] = tape.grad(b.name);
  }
  return out;
}

}  // namespace

GradSuiteResult run_grad_suite(std::span<const GradSuiteCase> cases, double step) {
  GradSuiteResult result;
  for (const GradSuiteCase& c : cases) {
    const ModelConfig cfg = make_config(c);
    Rng master(c.seed);
    Rng init_rng = master.fork(1);
    F2SParams params = init_params(cfg, init_rng);
    Rng data_rng = master.fork(2);

    // Move the prior off its symmetric zero point so its gradient is generic.
    for (std::size_t i = 0; i < params.x.size(); ++i) {
      params.x[i] = quantize_f32(data_rng.uniform(-1.0, 1.0));
    }

    FeatureRecord rec;
    rec.id = "gradcheck";
    rec.features["global"] = random_vector(cfg.global_dim, data_rng);
    for (std::size_t i = 0; i < cfg.num_attrs(); ++i) {
      rec.features[cfg.attribute_names[i]] = random_vector(cfg.attr_dims[i], data_rng);
    }
    const double gt = data_rng.uniform(cfg.grid.score_min(), cfg.grid.score_max());
    rec.overall = gt;
    Tensor1 gt_attrs(cfg.num_attrs());
    for (std::size_t i = 0; i < gt_attrs.size(); ++i) {
      gt_attrs[i] = data_rng.uniform(cfg.grid.score_min(), cfg.grid.score_max());
    }

    std::vector<ParamBinding> bindings = param_bindings(params);
    GradSuiteCaseResult cr;
    cr.config = c;

    // Semi-supervised loss; alternate the attribute-term target across cases.
    const SemiTarget target =
        c.seed % 2 == 0 ? SemiTarget::kPredictedStopGrad : SemiTarget::kGroundTruth;
    {
      GradTape tape;
      TapedParams tp = register_params(tape, params, cfg, /*with_prior=*/true);
      TapedForward fwd = taped_forward(tape, tp, cfg, rec);
      GradTape::Value loss = taped_semi_loss(tape, tp, fwd, cfg, gt, target);
      tape.backward(loss);
      auto analytic = collect_grads(tape, bindings);
      // With a stopped-prediction target the differentiated objective holds
      // the target at its base-point value.
      const double frozen = tape.scalar(fwd.overall);
      auto f = [&]() {
        Prediction p = forward_full(rec, params, cfg);
        Tensor1 w = prior_weights(params.x, cfg.sigma);
        if (target == SemiTarget::kGroundTruth) {
          return loss_semi(p, gt, w, cfg.lambda, cfg.grid, target);
        }
        return loss_semi_with_target(p, gt, w, cfg.lambda, cfg.grid, frozen);
      };
      GradCheckResult r = grad_check(f, bindings, analytic, step);
      cr.semi_error = r.max_rel_error;
      cr.worst_param = r.worst_param + "[" + std::to_string(r.worst_index) + "] (semi)";
    }

    // Supervised loss: the prior never joins the graph, so its analytic
    // gradient is reported as zero and the numeric one must agree.
    {
      GradTape tape;
      TapedParams tp = register_params(tape, params, cfg, /*with_prior=*/false);
      TapedForward fwd = taped_forward(tape, tp, cfg, rec);
      GradTape::Value loss = taped_supervised_loss(tape, fwd, cfg, gt, gt_attrs);
      tape.backward(loss);
      auto analytic = collect_grads(tape, bindings);
      auto f = [&]() {
        Prediction p = forward_full(rec, params, cfg);
        return loss_supervised(p, gt, gt_attrs, cfg.lambda, cfg.grid);
      };
      GradCheckResult r = grad_check(f, bindings, analytic, step);
      cr.supervised_error = r.max_rel_error;
      if (r.max_rel_error > cr.semi_error) {
        cr.worst_param = r.worst_param + "[" + std::to_string(r.worst_index) + "] (supervised)";
      }
    }

    result.max_rel_error =
        std::max({result.max_rel_error, cr.semi_error, cr.supervised_error});
    result.cases.push_back(std::move(cr));
  }
  return result;
}

}  // namespace f2s
