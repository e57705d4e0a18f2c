#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "f2s/error.hpp"
#include "f2s/gradcheck.hpp"
#include "f2s/model.hpp"
#include "f2s/rng.hpp"

using namespace f2s;

namespace {

ModelConfig small_config(std::size_t attrs = 2, bool extra = true) {
  ModelConfig cfg;
  for (std::size_t i = 0; i < attrs; ++i) {
    cfg.attribute_names.push_back("attr" + std::to_string(i + 1));
    cfg.attr_dims.push_back(3);
  }
  cfg.global_dim = 4;
  cfg.include_extra = extra;
  cfg.hidden = 5;
  cfg.validate();
  return cfg;
}

FeatureRecord random_record(const ModelConfig& cfg, Rng& rng) {
  FeatureRecord rec;
  rec.id = "r";
  Tensor1 g(cfg.global_dim);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1.0, 1.0);
  rec.features["global"] = g;
  for (std::size_t a = 0; a < cfg.num_attrs(); ++a) {
    Tensor1 f(cfg.attr_dims[a]);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(-1.0, 1.0);
    rec.features[cfg.attribute_names[a]] = f;
  }
  rec.overall = rng.uniform(cfg.grid.score_min(), cfg.grid.score_max());
  return rec;
}

}  // namespace

TEST_CASE("bucket grid basics") {
  BucketGrid g = BucketGrid::integer_range(1, 10);
  CHECK(g.size() == 10);
  CHECK(g.score_min() == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(g.score_max() == doctest::Approx(1.0).epsilon(1e-15));

  BucketGrid g11 = BucketGrid::integer_range(0, 10);
  CHECK(g11.size() == 11);
  CHECK(g11.score_min() == 0.0);
  CHECK(g11.score_max() == doctest::Approx(10.0 / 11.0).epsilon(1e-15));

  CHECK_THROWS_AS((BucketGrid{{5.0}}.validate()), ConfigError);
  CHECK_THROWS_AS((BucketGrid{{2.0, 1.0}}.validate()), ConfigError);
  CHECK_THROWS_AS((BucketGrid{{1.0, 1.0}}.validate()), ConfigError);
}

TEST_CASE("model config validation") {
  ModelConfig cfg = small_config();
  CHECK(cfg.num_heads() == 3);
  CHECK(cfg.mixed_dim() == 4 + 3 + 3);
  CHECK(cfg.head_input_dim(0) == cfg.mixed_dim() + 3);
  CHECK(cfg.head_input_dim(2) == cfg.global_dim + cfg.mixed_dim());  // extra head

  ModelConfig bad = cfg;
  bad.attribute_names[1] = bad.attribute_names[0];
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.attribute_names[0] = "global";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.attr_dims[0] = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.attr_dims.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.lambda = -0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.hidden = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  ModelConfig none;
  none.global_dim = 2;
  none.include_extra = false;
  CHECK_THROWS_AS(none.validate(), ConfigError);  // zero heads
  none.include_extra = true;
  CHECK_NOTHROW(none.validate());
  CHECK(none.num_heads() == 1);
}

TEST_CASE("assemble_mixed") {
  ModelConfig cfg;
  cfg.attribute_names = {"a", "b"};
  cfg.attr_dims = {1, 1};
  cfg.global_dim = 1;
  cfg.validate();
  Tensor1 g{1.0}, a{2.0}, b{3.0};
  const Tensor1* attrs[] = {&a, &b};
  CHECK(assemble_mixed(cfg, g, attrs) == Tensor1{1.0, 2.0, 3.0});

  ModelConfig solo;
  solo.global_dim = 3;
  solo.include_extra = true;
  solo.validate();
  Tensor1 g3{1.0, 2.0, 3.0};
  CHECK(assemble_mixed(solo, g3, {}) == g3);

  Tensor1 wrong{2.0, 9.0};
  const Tensor1* bad[] = {&wrong, &b};
  CHECK_THROWS_AS(assemble_mixed(cfg, g, bad), DataError);
}

TEST_CASE("head forwards") {
  ModelConfig cfg = small_config();
  Rng rng(3);
  F2SParams zero;
  {
    Rng r0(1);
    zero = init_params(cfg, r0);
    for (auto& h : zero.heads) {
      std::fill(h.W1.data(), h.W1.data() + h.W1.size(), 0.0);
      std::fill(h.W2.data(), h.W2.data() + h.W2.size(), 0.0);
    }
  }
  FeatureRecord rec = random_record(cfg, rng);
  const Tensor1* attrs[] = {&rec.features.at("attr1"), &rec.features.at("attr2")};
  Tensor1 mixed = assemble_mixed(cfg, rec.features.at("global"), attrs);

  ScoreDistribution d = attribute_head_forward(mixed, rec.features.at("attr1"), zero.heads[0]);
  for (std::size_t i = 0; i < d.p.size(); ++i)
    CHECK(d.p[i] == doctest::Approx(0.1).epsilon(1e-12));

  ScoreDistribution e = extra_head_forward(rec.features.at("global"), mixed, zero.heads[2]);
  for (std::size_t i = 0; i < e.p.size(); ++i)
    CHECK(e.p[i] == doctest::Approx(0.1).epsilon(1e-12));

  Rng r1(9);
  F2SParams params = init_params(cfg, r1);
  ScoreDistribution rd = attribute_head_forward(mixed, rec.features.at("attr1"), params.heads[0]);
  double sum = 0.0;
  for (std::size_t i = 0; i < rd.p.size(); ++i) {
    CHECK(rd.p[i] >= 0.0);
    sum += rd.p[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  // Same input, same params: bit identical.
  ScoreDistribution rd2 = attribute_head_forward(mixed, rec.features.at("attr1"), params.heads[0]);
  CHECK(rd.p == rd2.p);
}

TEST_CASE("score_from_distribution point values") {
  BucketGrid g10 = BucketGrid::integer_range(1, 10);
  ScoreDistribution uniform{Tensor1(10, 0.1)};
  CHECK(std::abs(score_from_distribution(uniform, g10) - 0.55) < 1e-9);

  ScoreDistribution hot10{Tensor1(10)};
  hot10.p[9] = 1.0;
  CHECK(std::abs(score_from_distribution(hot10, g10) - 1.0) < 1e-9);

  BucketGrid g11 = BucketGrid::integer_range(0, 10);
  ScoreDistribution hot0{Tensor1(11)};
  hot0.p[0] = 1.0;
  CHECK(std::abs(score_from_distribution(hot0, g11) - 0.0) < 1e-9);

  CHECK_THROWS_AS(score_from_distribution(uniform, g11), ConfigError);
}

TEST_CASE("contributions") {
  Tensor1 mixed{0.3, -0.7};
  Tensor2 Wc0(5, 2);
  Tensor1 bc0(5);
  Tensor1 c = contributions(mixed, Wc0, bc0);
  for (std::size_t i = 0; i < 5; ++i) CHECK(c[i] == doctest::Approx(0.2).epsilon(1e-15));

  Tensor2 Wc2(2, 2);
  Tensor1 bc2{0.0, std::log(3.0)};
  Tensor1 c2 = contributions(mixed, Wc2, bc2);
  CHECK(c2[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c2[1] == doctest::Approx(0.75).epsilon(1e-12));

  Tensor1 bc2s{10.0, 10.0 + std::log(3.0)};
  Tensor1 c2s = contributions(mixed, Wc2, bc2s);
  CHECK(c2s[0] == doctest::Approx(c2[0]).epsilon(1e-12));
  CHECK(c2s[1] == doctest::Approx(c2[1]).epsilon(1e-12));
}

TEST_CASE("overall_score") {
  CHECK(overall_score(Tensor1{0.5, 0.5}, Tensor1{0.3, 0.7}) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(overall_score(Tensor1{0.2, 0.8}, Tensor1{0.5, 0.5}) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(overall_score(Tensor1{0.2, 0.8}, Tensor1{0.0, 1.0}) == 0.8);
  CHECK_THROWS_AS(overall_score(Tensor1{0.5}, Tensor1{0.5, 0.5}), ConfigError);
}

TEST_CASE("prior weights") {
  Tensor1 w = prior_weights(Tensor1(4), 1.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(w[i] == doctest::Approx(0.25).epsilon(1e-15));

  // Saturated first logit, two heads.
  Tensor1 w2 = prior_weights(Tensor1{40.0, 0.0}, 1.0);
  CHECK(w2[0] == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(1e-9));

  Rng rng(77);
  for (int k = 0; k < 1000; ++k) {
    std::size_t n = 1 + rng.index(8);
    // Alternate moderate and saturating logit ranges. At double precision a
    // saturated sigmoid rounds to exactly 0 or 1, so the ratio bound e is
    // attained there rather than approached; the strict inequality is only
    // observable while the sigmoids stay off their limits.
    const double scale = (k % 2 == 0) ? 8.0 : 50.0;
    Tensor1 x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rng.uniform(-scale, scale);
    Tensor1 ww = prior_weights(x, 1.0);
    double lo = ww[0], hi = ww[0], sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, ww[i]);
      hi = std::max(hi, ww[i]);
      sum += ww[i];
      CHECK(ww[i] > 0.0);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hi / lo <= std::exp(1.0) * (1.0 + 1e-12));
    if (scale < 20.0) CHECK(hi / lo < std::exp(1.0));
  }
}

TEST_CASE("semi loss hand values") {
  BucketGrid g10 = BucketGrid::integer_range(1, 10);
  Prediction p;
  p.S = Tensor1{0.5};
  p.C = Tensor1{1.0};
  p.overall = 0.5;
  Tensor1 w{1.0};
  // Stop-gradient target: attribute term vanishes at the fixed point.
  CHECK(loss_semi(p, 0.7, w, 1.0, g10) == doctest::Approx(0.04).epsilon(1e-12));
  // Ground-truth target: (0.5*1 - 0.7*1)^2 adds another 0.04.
  CHECK(loss_semi(p, 0.7, w, 1.0, g10, SemiTarget::kGroundTruth) ==
        doctest::Approx(0.08).epsilon(1e-12));

  // Exact fixed point.
  Prediction q;
  q.S = Tensor1{0.25, 0.75};
  q.C = Tensor1{0.5, 0.5};
  q.overall = overall_score(q.S, q.C);
  Tensor1 w2{0.25, 0.75};
  // S_i C_i = overall * w_i: 0.125 = 0.5*0.25, 0.375 = 0.5*0.75.
  CHECK(loss_semi(q, q.overall, w2, 1.0, g10) == doctest::Approx(0.0).epsilon(1e-15));

  // Lambda 0 collapses to the overall term bit for bit.
  const double l0 = loss_semi(p, 0.7, w, 0.0, g10);
  const double d = p.overall - 0.7;
  CHECK(l0 == d * d);

  CHECK_THROWS_AS(loss_semi(p, 1.5, w, 1.0, g10), DataError);
  CHECK_THROWS_AS(loss_semi(p, std::nan(""), w, 1.0, g10), DataError);
}

TEST_CASE("supervised loss hand values") {
  BucketGrid g10 = BucketGrid::integer_range(1, 10);
  Prediction p;
  p.S = Tensor1{0.5, 0.3};  // one named head + extra
  p.C = Tensor1{0.6, 0.4};
  p.overall = 0.7;
  Tensor1 gt{0.7};
  CHECK(loss_supervised(p, 0.7, gt, 1.0, g10) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(loss_supervised(p, 0.7, gt, 0.0, g10) == 0.0);
  CHECK(loss_supervised(p, 0.7, Tensor1{0.5}, 1.0, g10) == doctest::Approx(0.0).epsilon(1e-15));

  Tensor1 too_many{0.5, 0.5, 0.5};
  CHECK_THROWS_AS(loss_supervised(p, 0.7, too_many, 1.0, g10), DataError);
}

TEST_CASE("forward_full zero params and invariants") {
  ModelConfig cfg = small_config();
  Rng r(1);
  F2SParams params = init_params(cfg, r);
  for (auto& h : params.heads) {
    std::fill(h.W1.data(), h.W1.data() + h.W1.size(), 0.0);
    std::fill(h.W2.data(), h.W2.data() + h.W2.size(), 0.0);
  }
  std::fill(params.Wc.data(), params.Wc.data() + params.Wc.size(), 0.0);

  Rng rng(4);
  FeatureRecord rec = random_record(cfg, rng);
  Prediction p = forward_full(rec, params, cfg);
  for (std::size_t i = 0; i < p.S.size(); ++i) {
    CHECK(p.S[i] == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(p.C[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  CHECK(p.overall == doctest::Approx(0.55).epsilon(1e-12));

  // Random-parameter invariants.
  for (int k = 0; k < 25; ++k) {
    Rng rp(100 + k);
    F2SParams rnd = init_params(cfg, rp);
    FeatureRecord rr = random_record(cfg, rng);
    Prediction pr = forward_full(rr, rnd, cfg);
    double csum = 0.0, sc = 0.0;
    for (std::size_t i = 0; i < pr.C.size(); ++i) {
      csum += pr.C[i];
      sc += pr.S[i] * pr.C[i];
      CHECK(pr.S[i] >= cfg.grid.score_min());
      CHECK(pr.S[i] <= cfg.grid.score_max());
    }
    CHECK(std::abs(csum - 1.0) < 1e-6);
    CHECK(std::abs(pr.overall - sc) < 1e-6);
  }
}

namespace {

// Applies an attribute permutation consistently to config, params, record.
// Heads, prior entries and contribution rows move with their attribute;
// weight columns acting on the mixed vector are re-blocked to the permuted
// layout. perm[new_pos] = old_pos.
struct PermutedModel {
  ModelConfig cfg;
  F2SParams params;
  FeatureRecord rec;
};

PermutedModel permute_attrs(const ModelConfig& cfg, const F2SParams& params,
                            const FeatureRecord& rec, const std::vector<std::size_t>& perm) {
  PermutedModel out;
  out.cfg = cfg;
  for (std::size_t n = 0; n < perm.size(); ++n) {
    out.cfg.attribute_names[n] = cfg.attribute_names[perm[n]];
    out.cfg.attr_dims[n] = cfg.attr_dims[perm[n]];
  }
  out.rec = rec;

  // Column map old mixed index -> new mixed index.
  const std::size_t A = cfg.num_attrs();
  std::vector<std::size_t> old_off(A), new_off(A);
  std::size_t off = cfg.global_dim;
  for (std::size_t a = 0; a < A; ++a) {
    old_off[a] = off;
    off += cfg.attr_dims[a];
  }
  off = cfg.global_dim;
  for (std::size_t n = 0; n < A; ++n) {
    new_off[n] = off;
    off += out.cfg.attr_dims[n];
  }
  std::vector<std::size_t> col_map(cfg.mixed_dim());
  for (std::size_t gcol = 0; gcol < cfg.global_dim; ++gcol) col_map[gcol] = gcol;
  for (std::size_t n = 0; n < A; ++n) {
    const std::size_t a = perm[n];
    for (std::size_t d = 0; d < cfg.attr_dims[a]; ++d) col_map[old_off[a] + d] = new_off[n] + d;
  }

  auto remap_mixed_cols = [&](const Tensor2& W, std::size_t mixed_col0) {
    Tensor2 out_w = W;
    for (std::size_t r = 0; r < W.rows(); ++r) {
      for (std::size_t cidx = 0; cidx < cfg.mixed_dim(); ++cidx) {
        out_w.at(r, mixed_col0 + col_map[cidx]) = W.at(r, mixed_col0 + cidx);
      }
    }
    return out_w;
  };

  out.params = params;
  for (std::size_t n = 0; n < A; ++n) {
    const std::size_t a = perm[n];
    HeadParams h = params.heads[a];
    h.W1 = remap_mixed_cols(h.W1, 0);  // head input = [mixed ; attr]
    out.params.heads[n] = std::move(h);
    out.params.x[n] = params.x[a];
  }
  if (cfg.include_extra) {
    HeadParams h = params.heads[A];
    h.W1 = remap_mixed_cols(h.W1, cfg.global_dim);  // extra input = [global ; mixed]
    out.params.heads[A] = std::move(h);
    out.params.x[A] = params.x[A];
  }
  Tensor2 Wc = remap_mixed_cols(params.Wc, 0);
  for (std::size_t n = 0; n < A; ++n) {
    for (std::size_t cidx = 0; cidx < Wc.cols(); ++cidx)
      out.params.Wc.at(n, cidx) = Wc.at(perm[n], cidx);
    out.params.bc[n] = params.bc[perm[n]];
  }
  if (cfg.include_extra) {
    for (std::size_t cidx = 0; cidx < Wc.cols(); ++cidx)
      out.params.Wc.at(A, cidx) = Wc.at(A, cidx);
  }
  return out;
}

}  // namespace

TEST_CASE("attribute permutation symmetry") {
  ModelConfig cfg;
  cfg.attribute_names = {"a", "b", "c"};
  cfg.attr_dims = {2, 3, 4};
  cfg.global_dim = 3;
  cfg.hidden = 6;
  cfg.validate();
  Rng rng(21);
  const std::vector<std::size_t> perm{2, 0, 1};
  for (int k = 0; k < 5; ++k) {
    Rng rp(500 + k);
    F2SParams params = init_params(cfg, rp);
    FeatureRecord rec = random_record(cfg, rng);
    Prediction base = forward_full(rec, params, cfg);
    PermutedModel pm = permute_attrs(cfg, params, rec, perm);
    Prediction moved = forward_full(pm.rec, pm.params, pm.cfg);
    for (std::size_t n = 0; n < perm.size(); ++n) {
      CHECK(moved.S[n] == doctest::Approx(base.S[perm[n]]).epsilon(1e-9));
      CHECK(moved.C[n] == doctest::Approx(base.C[perm[n]]).epsilon(1e-9));
    }
    CHECK(moved.S[3] == doctest::Approx(base.S[3]).epsilon(1e-9));
    CHECK(std::abs(moved.overall - base.overall) < 1e-6);
  }
}

TEST_CASE("init_params determinism, shapes and 32-bit lattice") {
  ModelConfig cfg = small_config();
  Rng a(42), b(42), c2(43);
  F2SParams p1 = init_params(cfg, a);
  F2SParams p2 = init_params(cfg, b);
  F2SParams p3 = init_params(cfg, c2);
  CHECK(p1.heads[0].W1 == p2.heads[0].W1);
  CHECK(p1.Wc == p2.Wc);
  CHECK(p1.heads[0].W1.values() != p3.heads[0].W1.values());

  CHECK(p1.heads.size() == cfg.num_heads());
  for (std::size_t h = 0; h < cfg.num_heads(); ++h) {
    CHECK(p1.heads[h].W1.rows() == cfg.hidden);
    CHECK(p1.heads[h].W1.cols() == cfg.head_input_dim(h));
    CHECK(p1.heads[h].W2.rows() == cfg.grid.size());
    CHECK(p1.heads[h].W2.cols() == cfg.hidden);
  }
  CHECK(p1.Wc.rows() == cfg.num_heads());
  CHECK(p1.Wc.cols() == cfg.mixed_dim());
  CHECK(p1.x.size() == cfg.num_heads());
  CHECK(p1.x == Tensor1(cfg.num_heads()));
  CHECK(p1.bc == Tensor1(cfg.num_heads()));

  Tensor2 q = p1.heads[0].W1;
  quantize_f32(q);
  CHECK(q == p1.heads[0].W1);

  // Bound check on the uniform range.
  const double bound = std::sqrt(6.0 / (cfg.head_input_dim(0) + cfg.hidden));
  for (std::size_t i = 0; i < p1.heads[0].W1.size(); ++i) {
    CHECK(std::abs(p1.heads[0].W1.data()[i]) <= bound + 1e-9);
  }
}

TEST_CASE("taped forward equals eager bitwise") {
  ModelConfig cfg = small_config();
  cfg.lambda = 1.0;
  Rng rng(31);
  Rng rp(32);
  F2SParams params = init_params(cfg, rp);
  // Push the prior off zero so w is not uniform.
  for (std::size_t i = 0; i < params.x.size(); ++i)
    params.x[i] = quantize_f32(rng.uniform(-1.0, 1.0));
  FeatureRecord rec = random_record(cfg, rng);

  GradTape tape;
  TapedParams tp = register_params(tape, params, cfg, true);
  TapedForward fwd = taped_forward(tape, tp, cfg, rec);
  Prediction eager = forward_full(rec, params, cfg);

  CHECK(tape.value(fwd.S) == eager.S.values());
  CHECK(tape.value(fwd.C) == eager.C.values());
  CHECK(tape.scalar(fwd.overall) == eager.overall);

  const double gt = 0.62;
  GradTape::Value loss = taped_semi_loss(tape, tp, fwd, cfg, gt, SemiTarget::kPredictedStopGrad);
  Tensor1 w = prior_weights(params.x, cfg.sigma);
  CHECK(tape.scalar(loss) == loss_semi(eager, gt, w, cfg.lambda, cfg.grid));

  GradTape tape2;
  TapedParams tp2 = register_params(tape2, params, cfg, false);
  TapedForward fwd2 = taped_forward(tape2, tp2, cfg, rec);
  Tensor1 gt_attrs{0.3, 0.9};
  GradTape::Value sup = taped_supervised_loss(tape2, fwd2, cfg, gt, gt_attrs);
  CHECK(tape2.scalar(sup) == loss_supervised(eager, gt, gt_attrs, cfg.lambda, cfg.grid));

  CHECK_THROWS_AS(taped_supervised_loss(tape2, fwd2, cfg, gt, Tensor1{0.3}), DataError);
}

TEST_CASE("lambda zero keeps the prior off the tape") {
  ModelConfig cfg = small_config();
  cfg.lambda = 0.0;
  Rng rng(61);
  Rng rp(62);
  F2SParams params = init_params(cfg, rp);
  FeatureRecord rec = random_record(cfg, rng);

  GradTape tape;
  TapedParams tp = register_params(tape, params, cfg, /*with_prior=*/false);
  TapedForward fwd = taped_forward(tape, tp, cfg, rec);
  GradTape::Value loss = taped_semi_loss(tape, tp, fwd, cfg, 0.5, SemiTarget::kPredictedStopGrad);
  tape.backward(loss);
  CHECK_FALSE(tape.has_param("prior.x"));

  // Numeric check: the objective is flat in x, and the analytic map simply
  // has no entry for it.
  std::vector<ParamBinding> bindings = param_bindings(params);
  std::map<std::string, std::vector<double>> analytic;
  for (const auto& b : bindings)
    if (tape.has_param(b.name)) analytic[b.name] = tape.grad(b.name);
  auto f = [&]() {
    Prediction p = forward_full(rec, params, cfg);
    Tensor1 w = prior_weights(params.x, cfg.sigma);
    return loss_semi(p, 0.5, w, cfg.lambda, cfg.grid);
  };
  GradCheckResult r = grad_check(f, bindings, analytic);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("register_params naming") {
  ModelConfig cfg = small_config();
  Rng rp(5);
  F2SParams params = init_params(cfg, rp);
  GradTape tape;
  register_params(tape, params, cfg, true);
  std::vector<std::string> names = tape.param_names();
  for (const char* expect :
       {"head0.W1", "head0.b1", "head0.W2", "head0.b2", "head1.W1", "head2.W2", "contrib.Wc",
        "contrib.bc", "prior.x"}) {
    CHECK(std::find(names.begin(), names.end(), expect) != names.end());
  }
  GradTape tape2;
  register_params(tape2, params, cfg, false);
  CHECK_FALSE(tape2.has_param("prior.x"));

  std::vector<ParamBinding> bindings = param_bindings(params);
  CHECK(bindings.size() == cfg.num_heads() * 4 + 3);
  CHECK(bindings.front().name == "head0.W1");
  CHECK(bindings.back().name == "prior.x");
}
