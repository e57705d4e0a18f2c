#include "f2s/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "json.hpp"

#include "f2s/error.hpp"

namespace f2s {

using nlohmann::json;

namespace {

// Average (fractional) ranks, 1-based; tied values share the mean of the
// rank positions they occupy.
std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

bool is_constant(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] != v[0]) return false;
  }
  return true;
}

}  // namespace

double srcc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ConfigError("srcc: length mismatch " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  const std::size_t n = a.size();
  if (n < 2) throw DataError("srcc: need at least 2 samples, got " + std::to_string(n));
  require_finite(a, "srcc first argument");
  require_finite(b, "srcc second argument");
  if (is_constant(a)) throw DataError("srcc: first list is constant; correlation undefined");
  if (is_constant(b)) throw DataError("srcc: second list is constant; correlation undefined");

  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double m = (static_cast<double>(n) + 1.0) / 2.0;  // mean rank, exact
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xa = ra[i] - m;
    const double xb = rb[i] - m;
    num += xa * xb;
    da += xa * xa;
    db += xb * xb;
  }
  const double r = num / std::sqrt(da * db);
  return std::min(1.0, std::max(-1.0, r));
}

EvaluationReport evaluate(std::span<const FeatureRecord> records, const Checkpoint& ckpt,
                          std::size_t threads) {
  ckpt.model.validate();
  if (records.empty()) throw DataError("evaluate: no records");
  const std::size_t n = records.size();
  std::vector<Prediction> preds(n);

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads == 0 ? 1 : threads, n));
  auto run_range = [&](std::size_t t) {
    for (std::size_t i = t; i < n; i += workers) {
      const FeatureRecord r = ckpt.normalizer.apply(records[i]);
      preds[i] = forward_full(r, ckpt.params, ckpt.model);
    }
  };
  if (workers == 1) {
    run_range(0);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          run_range(t);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvaluationReport report;
  report.sample_count = n;
  report.mode = to_string(ckpt.train_config.mode);
  report.seed = ckpt.seed;

  Tensor1 yhat(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    yhat[i] = preds[i].overall;
    y[i] = records[i].overall;
  }
  report.overall_srcc = srcc(yhat.span(), y.span());
  report.overall_mse = mse(yhat, y);

  std::vector<std::string> names = ckpt.model.attribute_names;
  if (ckpt.model.include_extra) names.push_back("extra");
  for (std::size_t j = 0; j < names.size(); ++j) {
    AttributeMetrics row;
    row.name = names[j];
    double mean_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_c += preds[i].C[j];
    mean_c /= static_cast<double>(n);
    double var_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = preds[i].C[j] - mean_c;
      var_c += d * d;
    }
    row.mean_contribution = mean_c;
    row.std_contribution = std::sqrt(var_c / static_cast<double>(n));

    if (j < ckpt.model.num_attrs()) {
      std::vector<double> ps, ls;
      for (std::size_t i = 0; i < n; ++i) {
        auto it = records[i].attr_labels.find(names[j]);
        if (it == records[i].attr_labels.end()) continue;
        ps.push_back(preds[i].S[j]);
        ls.push_back(it->second);
      }
      if (ps.size() >= 2) {
        try {
          row.srcc = srcc(ps, ls);
        } catch (const DataError&) {
          // degenerate (constant) labels or predictions: leave unavailable
        }
        row.mse = mse(Tensor1(ps), Tensor1(ls));
      }
    }
    report.attributes.push_back(std::move(row));
  }
  return report;
}

namespace {

std::string num_str(double v) { return json(v).dump(); }

json report_to_json(const EvaluationReport& r) {
  json j;
  j["overall"] = json{{"srcc", r.overall_srcc}, {"mse", r.overall_mse}};
  json attrs = json::array();
  for (const AttributeMetrics& a : r.attributes) {
    json e;
    e["name"] = a.name;
    e["srcc"] = a.srcc ? json(*a.srcc) : json(nullptr);
    e["mse"] = a.mse ? json(*a.mse) : json(nullptr);
    e["mean_contribution"] = a.mean_contribution;
    e["std_contribution"] = a.std_contribution;
    attrs.push_back(std::move(e));
  }
  j["attributes"] = std::move(attrs);
  j["sample_count"] = r.sample_count;
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  return j;
}

}  // namespace

void write_report_json(const std::filesystem::path& path, const EvaluationReport& r) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << report_to_json(r).dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& r) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "attribute,srcc,mse,mean_contribution\n";
  for (const AttributeMetrics& a : r.attributes) {
    out << a.name << ',' << (a.srcc ? num_str(*a.srcc) : "") << ','
        << (a.mse ? num_str(*a.mse) : "") << ',' << num_str(a.mean_contribution) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

AblationVariant AblationVariant::parse(const std::string& s) {
  AblationVariant v;
  if (s == "complete") {
    v.kind = Kind::kComplete;
  } else if (s == "none") {
    v.kind = Kind::kNone;
  } else if (s.rfind("attr:", 0) == 0 && s.size() > 5) {
    v.kind = Kind::kAblate;
    v.attr = s.substr(5);
  } else {
    throw ConfigError("unknown ablation variant \"" + s +
                      "\" (expected complete, none, or attr:<name>)");
  }
  return v;
}

std::string AblationVariant::label() const {
  switch (kind) {
    case Kind::kComplete: return "complete";
    case Kind::kNone: return "none";
    case Kind::kAblate: return "ablate:" + attr;
  }
  return "?";
}

AblationRow ablate(std::span<const FeatureRecord> train_records,
                   std::span<const FeatureRecord> test_records, const ModelConfig& model_cfg,
                   const TrainConfig& train_cfg, const AblationVariant& variant,
                   std::size_t threads) {
  model_cfg.validate();
  std::vector<bool> replace(model_cfg.num_attrs(), false);
  if (variant.kind == AblationVariant::Kind::kNone) {
    replace.assign(replace.size(), true);
  } else if (variant.kind == AblationVariant::Kind::kAblate) {
    auto it = std::find(model_cfg.attribute_names.begin(), model_cfg.attribute_names.end(),
                        variant.attr);
    if (it == model_cfg.attribute_names.end()) {
      throw ConfigError("ablation: unknown attribute \"" + variant.attr + "\"");
    }
    replace[static_cast<std::size_t>(it - model_cfg.attribute_names.begin())] = true;
  }

  ModelConfig cfg = model_cfg;
  for (std::size_t i = 0; i < replace.size(); ++i) {
    if (replace[i]) cfg.attr_dims[i] = model_cfg.global_dim;
  }
  auto substituted = [&](std::span<const FeatureRecord> in) {
    std::vector<FeatureRecord> out;
    out.reserve(in.size());
    for (const FeatureRecord& r : in) {
      FeatureRecord m = r;
      for (std::size_t i = 0; i < replace.size(); ++i) {
        if (replace[i]) m.features[model_cfg.attribute_names[i]] = r.feature("global");
      }
      out.push_back(std::move(m));
    }
    return out;
  };

  auto [tr, va] = split_validation(substituted(train_records), train_cfg.val_fraction);
  const Checkpoint ckpt = train(tr, va, cfg, train_cfg);
  const std::vector<FeatureRecord> test = substituted(test_records);

  AblationRow row;
  row.variant = variant.label();
  row.report = evaluate(test, ckpt, threads);
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t j = 0; j < cfg.num_attrs(); ++j) {
    if (row.report.attributes[j].srcc) {
      acc += *row.report.attributes[j].srcc;
      ++cnt;
    }
  }
  if (cnt == 0) throw DataError("ablation: test records carry no usable attribute labels");
  row.mean_attr_srcc = acc / static_cast<double>(cnt);
  return row;
}

Inspection inspect(const FeatureRecord& rec, const Checkpoint& ckpt) {
  const FeatureRecord r = ckpt.normalizer.apply(rec);
  const Prediction p = forward_full(r, ckpt.params, ckpt.model);
  Inspection ins;
  ins.id = rec.id;
  ins.names = ckpt.model.attribute_names;
  if (ckpt.model.include_extra) ins.names.push_back("extra");
  ins.S = p.S;
  ins.C = p.C;
  ins.overall = p.overall;
  return ins;
}

void write_inspection_json(const std::filesystem::path& path, const Inspection& ins) {
  json j;
  j["id"] = ins.id;
  j["overall"] = ins.overall;
  json attrs = json::array();
  for (std::size_t i = 0; i < ins.names.size(); ++i) {
    attrs.push_back(
        json{{"name", ins.names[i]}, {"score", ins.S[i]}, {"contribution", ins.C[i]}});
  }
  j["attributes"] = std::move(attrs);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace f2s
