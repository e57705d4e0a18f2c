#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "f2s/model.hpp"
#include "f2s/record.hpp"
#include "f2s/tensor.hpp"

namespace f2s {

// Binary little-endian feature vector: magic "F2SF", u32 version = 1,
// u32 dim, then dim IEEE-754 32-bit floats. Values are quantized to 32 bits
// on write; files round-trip those values bit-exactly.
void write_feature_file(const std::filesystem::path& path, const Tensor1& v);
Tensor1 read_feature_file(const std::filesystem::path& path);

// One manifest record as written: raw (pre-affine) labels and feature-file
// paths relative to the manifest location.
struct ManifestEntry {
  std::string id;
  double overall = 0.0;
  std::map<std::string, double> attributes;  // optional
  std::map<std::string, std::string> features;
};

// UTF-8 JSON-Lines: a header object {attribute_order, label_scale,
// label_offset} followed by one record object per line.
struct Manifest {
  std::vector<std::string> attribute_order;
  double label_scale = 1.0;
  double label_offset = 0.0;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

// Feature dims of the first record (name -> dim), for deriving a model
// config before a full load.
std::map<std::string, std::size_t> probe_feature_dims(const std::filesystem::path& manifest_path);

// Builds a ModelConfig whose attribute order and feature dims come from the
// manifest (other fields keep their defaults / caller-set values in `base`).
ModelConfig derive_model_config(const std::filesystem::path& manifest_path,
                                const ModelConfig& base);

// Loads and validates every record: feature files read, dims checked
// against the config, labels mapped by the manifest affine into model score
// units (overall range-checked; attribute labels mapped the same way).
std::vector<FeatureRecord> load_manifest(const std::filesystem::path& path,
                                         const ModelConfig& cfg);

struct SyntheticConfig {
  std::size_t num_attrs = 4;
  std::size_t attr_dim = 16;
  std::size_t global_dim = 32;
  std::size_t train_n = 2000;
  std::size_t test_n = 500;
  double noise = 0.05;
  std::vector<double> c_star;  // empty -> skewed default (A, A-1, .., 1)/sum
  std::uint64_t seed = 7;
  BucketGrid grid = BucketGrid::integer_range(1, 10);

  void validate() const;
  // The simplex weights actually used (fills in the default when empty).
  std::vector<double> contributions() const;
};

struct SyntheticPaths {
  std::filesystem::path train_manifest;             // no attribute labels
  std::filesystem::path train_supervised_manifest;  // same records, labels exposed
  std::filesystem::path test_manifest;              // labels included for evaluation
};

// Latent per-attribute scores s*_i ~ U[score range]; attribute feature i is
// a seeded random affine embedding of s*_i plus white noise; the global
// feature embeds all of s*; the overall label is exactly Σ s*_i c*_i.
// Deterministic given the seed (test draws do not depend on train_n).
SyntheticPaths generate_synthetic(const SyntheticConfig& cfg,
                                  const std::filesystem::path& out_dir);

}  // namespace f2s
