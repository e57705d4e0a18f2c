#include "f2s/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "json.hpp"

#include "f2s/adam.hpp"
#include "f2s/error.hpp"

namespace f2s {

using nlohmann::json;

std::string to_string(TrainMode m) {
  return m == TrainMode::kSemi ? "semi" : "supervised";
}

std::string to_string(SemiTarget t) {
  return t == SemiTarget::kPredictedStopGrad ? "stopgrad" : "groundtruth";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "semi") return TrainMode::kSemi;
  if (s == "supervised") return TrainMode::kSupervised;
  throw ConfigError("unknown training mode \"" + s + "\" (expected semi or supervised)");
}

SemiTarget semi_target_from_string(const std::string& s) {
  if (s == "stopgrad") return SemiTarget::kPredictedStopGrad;
  if (s == "groundtruth") return SemiTarget::kGroundTruth;
  throw ConfigError("unknown semi target \"" + s + "\" (expected stopgrad or groundtruth)");
}

void TrainConfig::validate() const {
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
    throw ConfigError("train config: plateau factor must be in (0, 1)");
  }
  if (patience < 1) throw ConfigError("train config: patience must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch size must be >= 1");
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train config: lr must be > 0");
  if (!(min_lr > 0.0 && min_lr <= lr)) {
    throw ConfigError("train config: min lr must be in (0, lr]");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("train config: validation fraction must be in (0, 1)");
  }
}

bool plateau_step(PlateauState& st, double metric, double factor, std::size_t patience,
                  double min_lr) {
  if (!std::isfinite(metric)) throw DataError("plateau: non-finite metric");
  if (metric < st.best - 1e-8) {
    st.best = metric;
    st.count = 0;
    return false;
  }
  st.count += 1;
  if (st.count >= patience) {
    st.lr = std::max(st.lr * factor, min_lr);
    st.count = 0;
    return true;
  }
  return false;
}

std::pair<std::vector<FeatureRecord>, std::vector<FeatureRecord>> split_validation(
    std::vector<FeatureRecord> records, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("validation fraction must be in (0, 1)");
  }
  const std::size_t n = records.size();
  if (n < 2) throw DataError("need at least 2 records to split off a validation set");
  std::size_t k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  k = std::max<std::size_t>(1, std::min(k, n - 1));
  std::vector<FeatureRecord> val(std::make_move_iterator(records.begin() +
                                                         static_cast<std::ptrdiff_t>(n - k)),
                                 std::make_move_iterator(records.end()));
  records.resize(n - k);
  return {std::move(records), std::move(val)};
}

Checkpoint train(std::span<const FeatureRecord> train_records,
                 std::span<const FeatureRecord> val_records, const ModelConfig& model_cfg,
                 const TrainConfig& train_cfg) {
  model_cfg.validate();
  train_cfg.validate();
  if (train_records.empty()) throw DataError("train: empty training set");
  if (val_records.empty()) throw DataError("train: empty validation set");

  std::vector<std::string> feature_names;
  feature_names.push_back("global");
  for (const std::string& n : model_cfg.attribute_names) feature_names.push_back(n);

  FeatureNormalizer norm;
  if (train_cfg.normalize) norm = FeatureNormalizer::fit(train_records, feature_names);
  std::vector<FeatureRecord> tr, va;
  tr.reserve(train_records.size());
  va.reserve(val_records.size());
  for (const FeatureRecord& r : train_records) tr.push_back(norm.apply(r));
  for (const FeatureRecord& r : val_records) va.push_back(norm.apply(r));

  std::vector<Tensor1> gt_attrs;
  if (train_cfg.mode == TrainMode::kSupervised) {
    gt_attrs.reserve(tr.size());
    for (const FeatureRecord& r : tr) {
      Tensor1 labels(model_cfg.num_attrs());
      for (std::size_t i = 0; i < model_cfg.num_attrs(); ++i) {
        const std::string& name = model_cfg.attribute_names[i];
        auto it = r.attr_labels.find(name);
        if (it == r.attr_labels.end()) {
          throw DataError("record " + r.id + ": missing attribute label \"" + name +
                          "\" required for supervised training");
        }
        labels[i] = it->second;
      }
      gt_attrs.push_back(std::move(labels));
    }
  }

  const Rng master(train_cfg.seed);
  Rng rng_init = master.fork(1);
  Rng rng_shuffle = master.fork(2);
  F2SParams params = init_params(model_cfg, rng_init);
  std::vector<ParamBinding> bindings = param_bindings(params);
  AdamState adam(AdamConfig{train_cfg.lr, 0.9, 0.999, 1e-8});
  PlateauState plateau;
  plateau.lr = train_cfg.lr;

  const bool with_prior = train_cfg.mode == TrainMode::kSemi && model_cfg.lambda > 0.0;
  std::map<std::string, std::size_t> binding_sizes;
  for (const ParamBinding& b : bindings) binding_sizes[b.name] = b.size;
  std::map<std::string, std::vector<double>> zero_grads;

  const std::size_t n = tr.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochStats> history;
  history.reserve(train_cfg.epochs);
  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    rng_shuffle.shuffle(order);
    const double lr_epoch = adam.config().lr;
    double loss_acc = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += train_cfg.batch_size, ++batch_index) {
      const std::size_t bsz = std::min(train_cfg.batch_size, n - start);
      GradTape tape;
      const TapedParams tp = register_params(tape, params, model_cfg, with_prior);
      std::vector<GradTape::Value> losses;
      losses.reserve(bsz);
      for (std::size_t k = 0; k < bsz; ++k) {
        const std::size_t idx = order[start + k];
        const TapedForward fwd = taped_forward(tape, tp, model_cfg, tr[idx]);
        losses.push_back(train_cfg.mode == TrainMode::kSemi
                             ? taped_semi_loss(tape, tp, fwd, model_cfg, tr[idx].overall,
                                               train_cfg.semi_target)
                             : taped_supervised_loss(tape, fwd, model_cfg, tr[idx].overall,
                                                     gt_attrs[idx]));
      }
      const GradTape::Value batch_loss =
          tape.scale(tape.sum(tape.concat(losses)), 1.0 / static_cast<double>(bsz));
      const double loss_value = tape.scalar(batch_loss);
      if (!std::isfinite(loss_value)) {
        throw DataError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(batch_index));
      }
      tape.backward(batch_loss);
      auto grad_fn = [&](const std::string& name) -> std::span<const double> {
        if (tape.has_param(name)) return tape.grad(name);
        auto& z = zero_grads[name];
        if (z.size() != binding_sizes.at(name)) z.assign(binding_sizes.at(name), 0.0);
        return z;
      };
      adam_step(bindings, grad_fn, adam);
      loss_acc += loss_value * static_cast<double>(bsz);
    }

    Tensor1 preds(va.size()), labels(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
      preds[i] = forward_full(va[i], params, model_cfg).overall;
      labels[i] = va[i].overall;
    }
    const double val_mse = mse(preds, labels);
    plateau_step(plateau, val_mse, train_cfg.plateau_factor, train_cfg.patience,
                 train_cfg.min_lr);
    adam.config().lr = plateau.lr;

    EpochStats stats;
    stats.train_loss = loss_acc / static_cast<double>(n);
    stats.val_mse = val_mse;
    stats.lr = lr_epoch;
    history.push_back(stats);
  }

  Checkpoint ckpt;
  ckpt.version = 1;
  ckpt.model = model_cfg;
  ckpt.train_config = train_cfg;
  ckpt.params = std::move(params);
  ckpt.normalizer = std::move(norm);
  ckpt.history = std::move(history);
  ckpt.seed = train_cfg.seed;
  return ckpt;
}

namespace {

json tensor_to_json(const Tensor1& t) { return json(t.values()); }

Tensor1 tensor1_from_json(const json& j, std::size_t size, const std::string& what) {
  if (!j.is_array() || j.size() != size) {
    throw DataError("checkpoint: " + what + " must be an array of length " +
                    std::to_string(size));
  }
  Tensor1 t(size);
  for (std::size_t i = 0; i < size; ++i) {
    if (!j[i].is_number()) throw DataError("checkpoint: " + what + " has a non-numeric entry");
    t[i] = j[i].get<double>();
    if (!std::isfinite(t[i])) throw DataError("checkpoint: " + what + " has a non-finite entry");
  }
  return t;
}

// Shape-correct zeroed parameter set for a config.
F2SParams empty_params(const ModelConfig& cfg) {
  F2SParams p;
  for (std::size_t h = 0; h < cfg.num_heads(); ++h) {
    HeadParams head;
    head.W1 = Tensor2(cfg.hidden, cfg.head_input_dim(h));
    head.b1 = Tensor1(cfg.hidden);
    head.W2 = Tensor2(cfg.grid.size(), cfg.hidden);
    head.b2 = Tensor1(cfg.grid.size());
    p.heads.push_back(std::move(head));
  }
  p.Wc = Tensor2(cfg.num_heads(), cfg.mixed_dim());
  p.bc = Tensor1(cfg.num_heads());
  p.x = Tensor1(cfg.num_heads());
  return p;
}

double require_num(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw DataError(std::string("checkpoint: missing or non-numeric \"") + key + "\"");
  }
  return j[key].get<double>();
}

std::size_t require_uint(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) {
    throw DataError(std::string("checkpoint: missing or non-integer \"") + key + "\"");
  }
  return j[key].get<std::size_t>();
}

bool require_bool(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_boolean()) {
    throw DataError(std::string("checkpoint: missing or non-boolean \"") + key + "\"");
  }
  return j[key].get<bool>();
}

std::string require_str(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw DataError(std::string("checkpoint: missing or non-string \"") + key + "\"");
  }
  return j[key].get<std::string>();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j;
  j["format_version"] = ckpt.version;
  j["seed"] = ckpt.seed;

  json model;
  model["attribute_names"] = ckpt.model.attribute_names;
  model["attr_dims"] = ckpt.model.attr_dims;
  model["global_dim"] = ckpt.model.global_dim;
  model["include_extra"] = ckpt.model.include_extra;
  model["hidden"] = ckpt.model.hidden;
  model["grid"] = ckpt.model.grid.s;
  model["lambda"] = ckpt.model.lambda;
  model["sigma"] = ckpt.model.sigma;
  j["model"] = std::move(model);

  const TrainConfig& tc = ckpt.train_config;
  json train;
  train["mode"] = to_string(tc.mode);
  train["lr"] = tc.lr;
  train["plateau_factor"] = tc.plateau_factor;
  train["patience"] = tc.patience;
  train["batch_size"] = tc.batch_size;
  train["epochs"] = tc.epochs;
  train["seed"] = tc.seed;
  train["val_fraction"] = tc.val_fraction;
  train["semi_target"] = to_string(tc.semi_target);
  train["normalize"] = tc.normalize;
  train["min_lr"] = tc.min_lr;
  j["train"] = std::move(train);

  json params;
  F2SParams& p = const_cast<F2SParams&>(ckpt.params);
  for (const ParamBinding& b : param_bindings(p)) {
    params[b.name] = json(std::vector<double>(b.data, b.data + b.size));
  }
  j["params"] = std::move(params);

  if (ckpt.normalizer.enabled()) {
    json norm;
    for (const auto& [name, st] : ckpt.normalizer.stats()) {
      norm[name] = json{{"mean", tensor_to_json(st.mean)}, {"std", tensor_to_json(st.std)}};
    }
    j["normalizer"] = std::move(norm);
  } else {
    j["normalizer"] = nullptr;
  }

  json history = json::array();
  for (const EpochStats& e : ckpt.history) {
    history.push_back(json{{"train_loss", e.train_loss}, {"val_mse", e.val_mse}, {"lr", e.lr}});
  }
  j["history"] = std::move(history);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError(path.string() + ": checkpoint must be a JSON object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer()) {
    throw DataError(path.string() + ": missing format_version");
  }
  const int version = j["format_version"].get<int>();
  if (version != 1) {
    throw DataError(path.string() + ": unsupported checkpoint version " +
                    std::to_string(version));
  }

  Checkpoint ckpt;
  ckpt.version = version;
  try {
    if (!j.contains("model") || !j["model"].is_object()) {
      throw DataError("checkpoint: missing \"model\" object");
    }
    const json& model = j["model"];
    ModelConfig cfg;
    if (!model.contains("attribute_names") || !model["attribute_names"].is_array()) {
      throw DataError("checkpoint: model.attribute_names must be an array");
    }
    for (const auto& n : model["attribute_names"]) {
      if (!n.is_string()) throw DataError("checkpoint: attribute names must be strings");
      cfg.attribute_names.push_back(n.get<std::string>());
    }
    if (!model.contains("attr_dims") || !model["attr_dims"].is_array()) {
      throw DataError("checkpoint: model.attr_dims must be an array");
    }
    for (const auto& d : model["attr_dims"]) {
      if (!d.is_number_unsigned()) throw DataError("checkpoint: attr dims must be non-negative");
      cfg.attr_dims.push_back(d.get<std::size_t>());
    }
    cfg.global_dim = require_uint(model, "global_dim");
    cfg.include_extra = require_bool(model, "include_extra");
    cfg.hidden = require_uint(model, "hidden");
    if (!model.contains("grid") || !model["grid"].is_array()) {
      throw DataError("checkpoint: model.grid must be an array");
    }
    cfg.grid.s.clear();
    for (const auto& v : model["grid"]) {
      if (!v.is_number()) throw DataError("checkpoint: grid entries must be numbers");
      cfg.grid.s.push_back(v.get<double>());
    }
    cfg.lambda = require_num(model, "lambda");
    cfg.sigma = require_num(model, "sigma");
    cfg.validate();
    ckpt.model = std::move(cfg);

    if (!j.contains("train") || !j["train"].is_object()) {
      throw DataError("checkpoint: missing \"train\" object");
    }
    const json& train = j["train"];
    TrainConfig tc;
    tc.mode = train_mode_from_string(require_str(train, "mode"));
    tc.lr = require_num(train, "lr");
    tc.plateau_factor = require_num(train, "plateau_factor");
    tc.patience = require_uint(train, "patience");
    tc.batch_size = require_uint(train, "batch_size");
    tc.epochs = require_uint(train, "epochs");
    tc.seed = require_uint(train, "seed");
    tc.val_fraction = require_num(train, "val_fraction");
    tc.semi_target = semi_target_from_string(require_str(train, "semi_target"));
    tc.normalize = require_bool(train, "normalize");
    tc.min_lr = require_num(train, "min_lr");
    tc.validate();
    ckpt.train_config = tc;

    if (!j.contains("seed") || !j["seed"].is_number_unsigned()) {
      throw DataError("checkpoint: missing seed");
    }
    ckpt.seed = j["seed"].get<std::uint64_t>();

    if (!j.contains("params") || !j["params"].is_object()) {
      throw DataError("checkpoint: missing \"params\" object");
    }
    const json& params = j["params"];
    ckpt.params = empty_params(ckpt.model);
    std::size_t consumed = 0;
    for (const ParamBinding& b : param_bindings(ckpt.params)) {
      if (!params.contains(b.name)) {
        throw DataError("checkpoint: missing parameter \"" + b.name + "\"");
      }
      const Tensor1 flat = tensor1_from_json(params[b.name], b.size, "parameter " + b.name);
      for (std::size_t i = 0; i < b.size; ++i) b.data[i] = flat[i];
      ++consumed;
    }
    if (params.size() != consumed) {
      throw DataError("checkpoint: unexpected extra entries in \"params\"");
    }

    if (j.contains("normalizer") && !j["normalizer"].is_null()) {
      if (!j["normalizer"].is_object()) {
        throw DataError("checkpoint: \"normalizer\" must be an object or null");
      }
      std::map<std::string, FeatureNormalizer::Stats> stats;
      for (const auto& [name, entry] : j["normalizer"].items()) {
        std::size_t dim = 0;
        if (name == "global") {
          dim = ckpt.model.global_dim;
        } else {
          auto it = std::find(ckpt.model.attribute_names.begin(),
                              ckpt.model.attribute_names.end(), name);
          if (it == ckpt.model.attribute_names.end()) {
            throw DataError("checkpoint: normalizer entry for unknown feature \"" + name + "\"");
          }
          dim = ckpt.model.attr_dims[static_cast<std::size_t>(
              it - ckpt.model.attribute_names.begin())];
        }
        if (!entry.is_object() || !entry.contains("mean") || !entry.contains("std")) {
          throw DataError("checkpoint: normalizer entry \"" + name + "\" needs mean and std");
        }
        FeatureNormalizer::Stats st;
        st.mean = tensor1_from_json(entry["mean"], dim, "normalizer mean for " + name);
        st.std = tensor1_from_json(entry["std"], dim, "normalizer std for " + name);
        stats[name] = std::move(st);
      }
      ckpt.normalizer.set_stats(std::move(stats));
    }

    if (j.contains("history")) {
      if (!j["history"].is_array()) throw DataError("checkpoint: \"history\" must be an array");
      for (const auto& e : j["history"]) {
        EpochStats st;
        st.train_loss = require_num(e, "train_loss");
        st.val_mse = require_num(e, "val_mse");
        st.lr = require_num(e, "lr");
        ckpt.history.push_back(st);
      }
    }
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace f2s
