#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "f2s/model.hpp"
#include "f2s/record.hpp"

namespace f2s {

enum class TrainMode { kSemi, kSupervised };

std::string to_string(TrainMode m);
std::string to_string(SemiTarget t);
TrainMode train_mode_from_string(const std::string& s);
SemiTarget semi_target_from_string(const std::string& s);

struct TrainConfig {
  TrainMode mode = TrainMode::kSemi;
  double lr = 1e-4;
  double plateau_factor = 0.1;
  std::size_t patience = 5;
  std::size_t batch_size = 64;
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  SemiTarget semi_target = SemiTarget::kPredictedStopGrad;
  bool normalize = true;
  double min_lr = 1e-7;

  void validate() const;
};

// Reduce-on-plateau bookkeeping. Improvement means metric < best - 1e-8;
// the non-improvement count resets on improvement and after a reduction
// (best is retained across reductions).
struct PlateauState {
  double best = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  double lr = 0.0;
};

// Feeds one epoch metric; returns true when lr was reduced this call.
bool plateau_step(PlateauState& st, double metric, double factor, std::size_t patience,
                  double min_lr);

struct EpochStats {
  double train_loss = 0.0;  // mean per-sample loss over the epoch
  double val_mse = 0.0;
  double lr = 0.0;  // lr in effect during the epoch
};

struct Checkpoint {
  int version = 1;
  ModelConfig model;
  TrainConfig train_config;
  F2SParams params;
  FeatureNormalizer normalizer;
  std::vector<EpochStats> history;
  std::uint64_t seed = 0;
};

// Deterministic last-fraction split (records keep manifest order).
std::pair<std::vector<FeatureRecord>, std::vector<FeatureRecord>> split_validation(
    std::vector<FeatureRecord> records, double fraction);

// The full recipe: seeded shuffle per epoch, mini-batches (short final batch
// kept, loss averaged over its actual size), one Adam step per batch,
// validation overall MSE driving the plateau schedule after each epoch.
Checkpoint train(std::span<const FeatureRecord> train_records,
                 std::span<const FeatureRecord> val_records, const ModelConfig& model_cfg,
                 const TrainConfig& train_cfg);

// Versioned UTF-8 JSON; parameter arrays hold the 32-bit values as decimal
// numbers, so save -> load -> forward is bit-identical.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace f2s
