// f2s command-line front end: synthetic data, feature extraction, training,
// evaluation, ablation, inspection, and the gradient self-check.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "f2s/dataset.hpp"
#include "f2s/error.hpp"
#include "f2s/evaluation.hpp"
#include "f2s/gradsuite.hpp"
#include "f2s/image.hpp"
#include "f2s/model.hpp"
#include "f2s/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest round-trip decimal form, so printed values match report files.
std::string num(double v) { return json(v).dump(); }

void kv(const std::string& k, const std::string& v) {
  std::cout << "  " << k << " = " << v << "\n";
}

void print_train_config(const f2s::TrainConfig& tc, const f2s::ModelConfig& mc) {
  kv("mode", f2s::to_string(tc.mode));
  kv("lr", num(tc.lr));
  kv("batch", std::to_string(tc.batch_size));
  kv("epochs", std::to_string(tc.epochs));
  kv("patience", std::to_string(tc.patience));
  kv("factor", num(tc.plateau_factor));
  kv("min_lr", num(tc.min_lr));
  kv("lambda", num(mc.lambda));
  kv("sigma", num(mc.sigma));
  kv("hidden", std::to_string(mc.hidden));
  kv("val_fraction", num(tc.val_fraction));
  kv("semi_target", f2s::to_string(tc.semi_target));
  kv("normalize", tc.normalize ? "true" : "false");
  kv("seed", std::to_string(tc.seed));
}

void print_history(const std::vector<f2s::EpochStats>& history) {
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& e = history[i];
    std::cout << "epoch " << (i + 1) << "/" << history.size() << "  train_loss=" << num(e.train_loss)
              << "  val_mse=" << num(e.val_mse) << "  lr=" << num(e.lr) << "\n";
  }
}

void print_report(const f2s::EvaluationReport& r) {
  std::cout << "samples: " << r.sample_count << "\n";
  std::cout << "overall: srcc=" << num(r.overall_srcc) << " mse=" << num(r.overall_mse) << "\n";
  std::cout << "attribute\tsrcc\tmse\tmean_contribution\n";
  for (const auto& a : r.attributes) {
    std::cout << a.name << "\t" << (a.srcc ? num(*a.srcc) : "(n/a)") << "\t"
              << (a.mse ? num(*a.mse) : "(n/a)") << "\t" << num(a.mean_contribution) << "\n";
  }
}

struct TrainFlags {
  std::string manifest;
  std::string val_manifest;
  std::string mode = "semi";
  std::string out;
  std::string semi_target = "stopgrad";
  double lr = 1e-4;
  std::size_t batch = 64;
  std::size_t epochs = 40;
  std::size_t patience = 5;
  double factor = 0.1;
  double min_lr = 1e-7;
  double lambda = 1.0;
  double sigma = 1.0;
  std::size_t hidden = 128;
  double val_fraction = 0.1;
  bool no_normalize = false;
  std::uint64_t seed = 0;
};

// Shared by train and ablate: numeric flags mirror the training recipe
// defaults so the zero-flag invocation is the stock recipe.
void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--mode", f.mode, "Training mode")
      ->check(CLI::IsMember({"semi", "supervised"}))
      ->capture_default_str();
  cmd->add_option("--lr", f.lr, "Initial learning rate")->capture_default_str();
  cmd->add_option("--batch", f.batch, "Mini-batch size")->capture_default_str();
  cmd->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--patience", f.patience, "Plateau patience (epochs)")->capture_default_str();
  cmd->add_option("--factor", f.factor, "Plateau lr factor")->capture_default_str();
  cmd->add_option("--min-lr", f.min_lr, "Lower bound for the scheduled lr")
      ->capture_default_str();
  cmd->add_option("--lambda", f.lambda, "Attribute-term weight")->capture_default_str();
  cmd->add_option("--sigma", f.sigma, "Prior smoothing constant")->capture_default_str();
  cmd->add_option("--hidden", f.hidden, "Head hidden width")->capture_default_str();
  cmd->add_option("--val-fraction", f.val_fraction,
                  "Validation fraction when no --val-manifest is given")
      ->capture_default_str();
  cmd->add_option("--semi-target", f.semi_target, "Attribute-term target in semi mode")
      ->check(CLI::IsMember({"stopgrad", "groundtruth"}))
      ->capture_default_str();
  cmd->add_flag("--no-normalize", f.no_normalize, "Disable feature standardization");
  cmd->add_option("--seed", f.seed, "Training seed")->capture_default_str();
}

f2s::TrainConfig to_train_config(const TrainFlags& f) {
  f2s::TrainConfig tc;
  tc.mode = f2s::train_mode_from_string(f.mode);
  tc.lr = f.lr;
  tc.batch_size = f.batch;
  tc.epochs = f.epochs;
  tc.patience = f.patience;
  tc.plateau_factor = f.factor;
  tc.min_lr = f.min_lr;
  tc.val_fraction = f.val_fraction;
  tc.semi_target = f2s::semi_target_from_string(f.semi_target);
  tc.normalize = !f.no_normalize;
  tc.seed = f.seed;
  tc.validate();
  return tc;
}

f2s::ModelConfig base_model_config(const TrainFlags& f) {
  f2s::ModelConfig mc;
  mc.hidden = f.hidden;
  mc.lambda = f.lambda;
  mc.sigma = f.sigma;
  return mc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"f2s: attribute-score decomposition from overall aesthetic labels"};
  app.require_subcommand(1);
  int exit_code = 0;

  // synth
  struct {
    std::string out;
    std::uint64_t seed = 7;
    std::size_t attrs = 4;
    std::size_t dim = 16;
    std::size_t global_dim = 32;
    std::size_t train_n = 2000;
    std::size_t test_n = 500;
    double noise = 0.05;
  } sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic feature dataset");
  synth->add_option("--out", sy.out, "Output directory")->required();
  synth->add_option("--seed", sy.seed, "Generator seed")->capture_default_str();
  synth->add_option("--attrs", sy.attrs, "Number of named attributes")->capture_default_str();
  synth->add_option("--dim", sy.dim, "Attribute feature dim")->capture_default_str();
  synth->add_option("--global-dim", sy.global_dim, "Global feature dim")->capture_default_str();
  synth->add_option("--train-n", sy.train_n, "Training records")->capture_default_str();
  synth->add_option("--test-n", sy.test_n, "Test records")->capture_default_str();
  synth->add_option("--noise", sy.noise, "Embedding noise scale")->capture_default_str();
  synth->callback([&] {
    f2s::SyntheticConfig cfg;
    cfg.num_attrs = sy.attrs;
    cfg.attr_dim = sy.dim;
    cfg.global_dim = sy.global_dim;
    cfg.train_n = sy.train_n;
    cfg.test_n = sy.test_n;
    cfg.noise = sy.noise;
    cfg.seed = sy.seed;
    cfg.validate();
    std::cout << "run: synth\n";
    kv("out", sy.out);
    kv("seed", std::to_string(cfg.seed));
    kv("attrs", std::to_string(cfg.num_attrs));
    kv("dim", std::to_string(cfg.attr_dim));
    kv("global_dim", std::to_string(cfg.global_dim));
    kv("train_n", std::to_string(cfg.train_n));
    kv("test_n", std::to_string(cfg.test_n));
    kv("noise", num(cfg.noise));
    const f2s::SyntheticPaths paths = f2s::generate_synthetic(cfg, sy.out);
    std::cout << "wrote " << paths.train_manifest.string() << "\n";
    std::cout << "wrote " << paths.train_supervised_manifest.string() << "\n";
    std::cout << "wrote " << paths.test_manifest.string() << "\n";
  });

  // extract-hsv
  struct {
    std::string img, channels = "hsv", out;
    std::size_t grid = 4;
  } hv;
  auto* ehsv = app.add_subcommand("extract-hsv", "Grid HSV mean/variance features from a PPM");
  ehsv->add_option("--img", hv.img, "P6 PPM input")->required();
  ehsv->add_option("--grid", hv.grid, "Grid size g (g x g cells)")->required();
  ehsv->add_option("--channels", hv.channels, "Channel subset of hsv")->required();
  ehsv->add_option("--out", hv.out, "Output feature file")->required();
  ehsv->callback([&] {
    std::cout << "run: extract-hsv\n";
    kv("img", hv.img);
    kv("grid", std::to_string(hv.grid));
    kv("channels", hv.channels);
    kv("out", hv.out);
    const f2s::RasterImage img = f2s::read_ppm(hv.img);
    const f2s::HsvChannels ch = f2s::HsvChannels::parse(hv.channels);
    const f2s::Tensor1 v = f2s::hsv_grid_stats(img, hv.grid, ch);
    f2s::write_feature_file(hv.out, v);
    std::cout << "wrote " << hv.out << " (dim " << v.size() << ")\n";
  });

  // extract-sharp
  struct {
    std::string img, out;
    std::size_t grid = 4;
  } sp;
  auto* esharp = app.add_subcommand("extract-sharp", "Grid sharpness features from a PPM");
  esharp->add_option("--img", sp.img, "P6 PPM input")->required();
  esharp->add_option("--grid", sp.grid, "Grid size g (g x g cells)")->required();
  esharp->add_option("--out", sp.out, "Output feature file")->required();
  esharp->callback([&] {
    std::cout << "run: extract-sharp\n";
    kv("img", sp.img);
    kv("grid", std::to_string(sp.grid));
    kv("out", sp.out);
    const f2s::RasterImage img = f2s::read_ppm(sp.img);
    const f2s::Tensor1 v = f2s::sharpness_grid_stats(img, sp.grid);
    f2s::write_feature_file(sp.out, v);
    std::cout << "wrote " << sp.out << " (dim " << v.size() << ")\n";
  });

  // train
  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a manifest");
  train_cmd->add_option("--manifest", tf.manifest, "Training manifest")->required();
  train_cmd->add_option("--val-manifest", tf.val_manifest, "Validation manifest (optional)");
  train_cmd->add_option("--out", tf.out, "Output directory")->required();
  add_train_flags(train_cmd, tf);
  train_cmd->callback([&] {
    const f2s::TrainConfig tc = to_train_config(tf);
    const f2s::ModelConfig cfg = f2s::derive_model_config(tf.manifest, base_model_config(tf));
    std::cout << "run: train\n";
    kv("manifest", tf.manifest);
    if (!tf.val_manifest.empty()) kv("val_manifest", tf.val_manifest);
    kv("out", tf.out);
    print_train_config(tc, cfg);
    std::vector<f2s::FeatureRecord> train_recs = f2s::load_manifest(tf.manifest, cfg);
    std::vector<f2s::FeatureRecord> val_recs;
    if (tf.val_manifest.empty()) {
      auto split = f2s::split_validation(std::move(train_recs), tc.val_fraction);
      train_recs = std::move(split.first);
      val_recs = std::move(split.second);
    } else {
      val_recs = f2s::load_manifest(tf.val_manifest, cfg);
    }
    std::cout << "records: train=" << train_recs.size() << " val=" << val_recs.size() << "\n";
    const f2s::Checkpoint ck = f2s::train(train_recs, val_recs, cfg, tc);
    print_history(ck.history);
    fs::create_directories(tf.out);
    const fs::path ckpt_path = fs::path(tf.out) / "checkpoint.json";
    f2s::save_checkpoint(ckpt_path, ck);
    std::cout << "wrote " << ckpt_path.string() << "\n";
  });

  // eval
  struct {
    std::string manifest, ckpt, out;
    std::size_t threads = 1;
  } ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint against a manifest");
  eval_cmd->add_option("--manifest", ev.manifest, "Evaluation manifest")->required();
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();
  eval_cmd->add_option("--threads", ev.threads, "Forward-pass worker cap")
      ->envname("F2S_THREADS")
      ->capture_default_str();
  eval_cmd->callback([&] {
    std::cout << "run: eval\n";
    kv("manifest", ev.manifest);
    kv("ckpt", ev.ckpt);
    kv("out", ev.out);
    kv("threads", std::to_string(ev.threads));
    const f2s::Checkpoint ck = f2s::load_checkpoint(ev.ckpt);
    kv("seed", std::to_string(ck.seed));
    const std::vector<f2s::FeatureRecord> records = f2s::load_manifest(ev.manifest, ck.model);
    const f2s::EvaluationReport rep = f2s::evaluate(records, ck, ev.threads);
    fs::create_directories(ev.out);
    f2s::write_report_json(fs::path(ev.out) / "report.json", rep);
    f2s::write_report_csv(fs::path(ev.out) / "report.csv", rep);
    print_report(rep);
    std::cout << "wrote " << (fs::path(ev.out) / "report.json").string() << "\n";
    std::cout << "wrote " << (fs::path(ev.out) / "report.csv").string() << "\n";
  });

  // ablate
  TrainFlags af;
  struct {
    std::string test_manifest, variant;
    std::size_t threads = 1;
  } ab;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "Retrain with substituted features and evaluate");
  ablate_cmd->add_option("--manifest", af.manifest, "Training manifest")->required();
  ablate_cmd->add_option("--test-manifest", ab.test_manifest, "Test manifest")->required();
  ablate_cmd->add_option("--variant", ab.variant, "complete | none | attr:<name>")->required();
  ablate_cmd->add_option("--out", af.out, "Output directory")->required();
  ablate_cmd->add_option("--threads", ab.threads, "Forward-pass worker cap")
      ->envname("F2S_THREADS")
      ->capture_default_str();
  add_train_flags(ablate_cmd, af);
  ablate_cmd->callback([&] {
    const f2s::AblationVariant variant = f2s::AblationVariant::parse(ab.variant);
    const f2s::TrainConfig tc = to_train_config(af);
    const f2s::ModelConfig cfg = f2s::derive_model_config(af.manifest, base_model_config(af));
    std::cout << "run: ablate\n";
    kv("manifest", af.manifest);
    kv("test_manifest", ab.test_manifest);
    kv("variant", variant.label());
    kv("out", af.out);
    kv("threads", std::to_string(ab.threads));
    print_train_config(tc, cfg);
    const std::vector<f2s::FeatureRecord> train_recs = f2s::load_manifest(af.manifest, cfg);
    const std::vector<f2s::FeatureRecord> test_recs =
        f2s::load_manifest(ab.test_manifest, cfg);
    std::cout << "records: train=" << train_recs.size() << " test=" << test_recs.size() << "\n";
    const f2s::AblationRow row = f2s::ablate(train_recs, test_recs, cfg, tc, variant, ab.threads);
    fs::create_directories(af.out);
    f2s::write_report_json(fs::path(af.out) / "report.json", row.report);
    f2s::write_report_csv(fs::path(af.out) / "report.csv", row.report);
    json summary;
    summary["variant"] = row.variant;
    summary["mean_attribute_srcc"] = row.mean_attr_srcc;
    summary["overall_srcc"] = row.report.overall_srcc;
    std::ofstream out_file(fs::path(af.out) / "ablation.json", std::ios::binary);
    out_file << summary.dump(2) << '\n';
    if (!out_file) throw f2s::IoError("cannot write ablation.json under " + af.out);
    print_report(row.report);
    std::cout << "variant " << row.variant
              << ": mean attribute srcc = " << num(row.mean_attr_srcc) << "\n";
    std::cout << "wrote " << (fs::path(af.out) / "ablation.json").string() << "\n";
  });

  // inspect
  struct {
    std::string id, manifest, ckpt, out;
  } in;
  auto* inspect_cmd = app.add_subcommand("inspect", "Per-image score/contribution breakdown");
  inspect_cmd->add_option("--id", in.id, "Record id")->required();
  inspect_cmd->add_option("--manifest", in.manifest, "Manifest holding the record")->required();
  inspect_cmd->add_option("--ckpt", in.ckpt, "Checkpoint file")->required();
  inspect_cmd->add_option("--out", in.out, "Output JSON file")->required();
  inspect_cmd->callback([&] {
    std::cout << "run: inspect\n";
    kv("id", in.id);
    kv("manifest", in.manifest);
    kv("ckpt", in.ckpt);
    kv("out", in.out);
    const f2s::Checkpoint ck = f2s::load_checkpoint(in.ckpt);
    kv("seed", std::to_string(ck.seed));
    const std::vector<f2s::FeatureRecord> records = f2s::load_manifest(in.manifest, ck.model);
    const f2s::FeatureRecord* rec = nullptr;
    for (const auto& r : records) {
      if (r.id == in.id) {
        rec = &r;
        break;
      }
    }
    if (rec == nullptr) throw f2s::DataError("record id '" + in.id + "' not in " + in.manifest);
    const f2s::Inspection ins = f2s::inspect(*rec, ck);
    f2s::write_inspection_json(in.out, ins);
    std::cout << "id " << ins.id << ": overall=" << num(ins.overall) << "\n";
    std::cout << "attribute\tscore\tcontribution\n";
    for (std::size_t i = 0; i < ins.names.size(); ++i) {
      std::cout << ins.names[i] << "\t" << num(ins.S[i]) << "\t" << num(ins.C[i]) << "\n";
    }
    std::cout << "wrote " << in.out << "\n";
  });

  // gradcheck
  struct {
    std::uint64_t seed = 1000;
  } gc;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference check of the loss gradients");
  gradcheck_cmd->add_option("--seed", gc.seed, "Base seed for the 20 stock cases")
      ->capture_default_str();
  gradcheck_cmd->callback([&] {
    std::cout << "run: gradcheck\n";
    kv("seed", std::to_string(gc.seed));
    const std::vector<f2s::GradSuiteCase> cases = f2s::default_grad_suite(gc.seed);
    const f2s::GradSuiteResult res = f2s::run_grad_suite(cases);
    for (const auto& c : res.cases) {
      std::cout << "case seed=" << c.config.seed << " attrs=" << c.config.num_attrs
                << " attr_dim=" << c.config.attr_dim << " global_dim=" << c.config.global_dim
                << " buckets=" << c.config.buckets << "  semi=" << num(c.semi_error)
                << " supervised=" << num(c.supervised_error) << "\n";
    }
    std::cout << "max relative error: " << num(res.max_rel_error) << "\n";
    if (!(res.max_rel_error < 1e-4)) {
      std::cout << "gradcheck FAILED (threshold 1e-4)\n";
      exit_code = 1;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const f2s::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == f2s::ErrorKind::Internal ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
