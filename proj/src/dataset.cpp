#include "f2s/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"

#include "f2s/error.hpp"
#include "f2s/rng.hpp"

namespace f2s {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'F', '2', 'S', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32(const std::string& d, std::size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(d[off])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(d[off + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(d[off + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(d[off + 3])) << 24;
}

}  // namespace

void write_feature_file(const std::filesystem::path& path, const Tensor1& v) {
  require_finite(v, "feature file " + path.string());
  std::string buf;
  buf.reserve(12 + 4 * v.size());
  buf.append(kMagic, 4);
  put_u32(buf, kFeatureVersion);
  put_u32(buf, static_cast<std::uint32_t>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float f = static_cast<float>(v[i]);
    std::uint32_t bits;
    static_assert(sizeof(bits) == sizeof(f));
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32(buf, bits);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor1 read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string d((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (d.size() < 12) {
    throw DataError(path.string() + ": truncated header at byte offset " +
                    std::to_string(d.size()));
  }
  if (d.compare(0, 4, kMagic, 4) != 0) {
    throw DataError(path.string() + ": bad magic at byte offset 0");
  }
  const std::uint32_t version = get_u32(d, 4);
  if (version != kFeatureVersion) {
    throw DataError(path.string() + ": unsupported version " + std::to_string(version) +
                    " at byte offset 4");
  }
  const std::uint32_t dim = get_u32(d, 8);
  const std::size_t expected = 12 + 4 * static_cast<std::size_t>(dim);
  if (d.size() != expected) {
    throw DataError(path.string() + ": length field at byte offset 8 declares " +
                    std::to_string(dim) + " values (" + std::to_string(expected) +
                    " bytes) but the file has " + std::to_string(d.size()) + " bytes");
  }
  Tensor1 v(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    const std::uint32_t bits = get_u32(d, 12 + 4 * static_cast<std::size_t>(i));
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    if (!std::isfinite(f)) {
      throw DataError(path.string() + ": non-finite value at byte offset " +
                      std::to_string(12 + 4 * static_cast<std::size_t>(i)));
    }
    v[i] = static_cast<double>(f);
  }
  return v;
}

namespace {

[[noreturn]] void manifest_error(const std::filesystem::path& path, std::size_t line,
                                 const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

double require_number(const json& j, const char* key, const std::filesystem::path& path,
                      std::size_t line) {
  if (!j.contains(key) || !j[key].is_number()) {
    manifest_error(path, line, std::string("missing or non-numeric \"") + key + "\"");
  }
  return j[key].get<double>();
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Manifest m;
  bool have_header = false;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      manifest_error(path, lineno, e.what());
    }
    if (!j.is_object()) manifest_error(path, lineno, "expected a JSON object");
    if (!have_header) {
      if (!j.contains("attribute_order") || !j["attribute_order"].is_array()) {
        manifest_error(path, lineno, "header must carry an \"attribute_order\" array");
      }
      for (const auto& name : j["attribute_order"]) {
        if (!name.is_string()) manifest_error(path, lineno, "attribute_order entries must be strings");
        m.attribute_order.push_back(name.get<std::string>());
      }
      m.label_scale = require_number(j, "label_scale", path, lineno);
      m.label_offset = require_number(j, "label_offset", path, lineno);
      have_header = true;
      continue;
    }
    ManifestEntry e;
    if (!j.contains("id") || !j["id"].is_string()) {
      manifest_error(path, lineno, "record missing string \"id\"");
    }
    e.id = j["id"].get<std::string>();
    if (!ids.insert(e.id).second) manifest_error(path, lineno, "duplicate id \"" + e.id + "\"");
    e.overall = require_number(j, "overall", path, lineno);
    if (j.contains("attributes")) {
      if (!j["attributes"].is_object()) manifest_error(path, lineno, "\"attributes\" must be an object");
      for (const auto& [k, v] : j["attributes"].items()) {
        if (!v.is_number()) manifest_error(path, lineno, "attribute label \"" + k + "\" must be a number");
        e.attributes[k] = v.get<double>();
      }
    }
    if (!j.contains("features") || !j["features"].is_object()) {
      manifest_error(path, lineno, "record missing \"features\" object");
    }
    for (const auto& [k, v] : j["features"].items()) {
      if (!v.is_string()) manifest_error(path, lineno, "feature path \"" + k + "\" must be a string");
      e.features[k] = v.get<std::string>();
    }
    m.entries.push_back(std::move(e));
  }
  if (!have_header) throw DataError(path.string() + ": missing manifest header line");
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  json header;
  header["attribute_order"] = m.attribute_order;
  header["label_scale"] = m.label_scale;
  header["label_offset"] = m.label_offset;
  out << header.dump() << '\n';
  for (const ManifestEntry& e : m.entries) {
    json j;
    j["id"] = e.id;
    j["overall"] = e.overall;
    if (!e.attributes.empty()) j["attributes"] = e.attributes;
    j["features"] = e.features;
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::map<std::string, std::size_t> probe_feature_dims(
    const std::filesystem::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  if (m.entries.empty()) throw DataError(manifest_path.string() + ": manifest has no records");
  const std::filesystem::path dir = manifest_path.parent_path();
  std::map<std::string, std::size_t> dims;
  for (const auto& [name, rel] : m.entries.front().features) {
    dims[name] = read_feature_file(dir / rel).size();
  }
  return dims;
}

ModelConfig derive_model_config(const std::filesystem::path& manifest_path,
                                const ModelConfig& base) {
  const Manifest m = read_manifest(manifest_path);
  const auto dims = probe_feature_dims(manifest_path);
  ModelConfig cfg = base;
  cfg.attribute_names = m.attribute_order;
  cfg.attr_dims.clear();
  for (const std::string& name : m.attribute_order) {
    auto it = dims.find(name);
    if (it == dims.end()) {
      throw DataError(manifest_path.string() + ": first record has no feature for attribute \"" +
                      name + "\"");
    }
    cfg.attr_dims.push_back(it->second);
  }
  auto it = dims.find("global");
  if (it == dims.end()) {
    throw DataError(manifest_path.string() + ": first record has no \"global\" feature");
  }
  cfg.global_dim = it->second;
  return cfg;
}

std::vector<FeatureRecord> load_manifest(const std::filesystem::path& path,
                                         const ModelConfig& cfg) {
  cfg.validate();
  const Manifest m = read_manifest(path);
  if (m.attribute_order != cfg.attribute_names) {
    std::string got, want;
    for (const auto& n : m.attribute_order) got += (got.empty() ? "" : ",") + n;
    for (const auto& n : cfg.attribute_names) want += (want.empty() ? "" : ",") + n;
    throw DataError(path.string() + ": attribute order [" + got +
                    "] does not match the model's [" + want + "]");
  }
  const std::filesystem::path dir = path.parent_path();
  std::vector<FeatureRecord> out;
  out.reserve(m.entries.size());
  for (const ManifestEntry& e : m.entries) {
    FeatureRecord r;
    r.id = e.id;
    r.overall = e.overall * m.label_scale + m.label_offset;
    if (!(r.overall >= cfg.grid.score_min() && r.overall <= cfg.grid.score_max())) {
      throw DataError("record " + e.id + ": overall label " + std::to_string(r.overall) +
                      " (raw " + std::to_string(e.overall) + ") outside model score range [" +
                      std::to_string(cfg.grid.score_min()) + ", " +
                      std::to_string(cfg.grid.score_max()) + "]");
    }
    for (const auto& [name, raw] : e.attributes) {
      r.attr_labels[name] = raw * m.label_scale + m.label_offset;
    }
    std::vector<std::string> needed;
    needed.push_back("global");
    for (const std::string& n : cfg.attribute_names) needed.push_back(n);
    for (std::size_t i = 0; i < needed.size(); ++i) {
      const std::string& name = needed[i];
      auto it = e.features.find(name);
      if (it == e.features.end()) {
        throw DataError("record " + e.id + ": missing feature \"" + name + "\"");
      }
      Tensor1 v;
      try {
        v = read_feature_file(dir / it->second);
      } catch (const Error& err) {
        throw Error(err.kind(), "record " + e.id + ": " + err.what());
      }
      const std::size_t want = i == 0 ? cfg.global_dim : cfg.attr_dims[i - 1];
      if (v.size() != want) {
        throw DataError("record " + e.id + ": feature \"" + name + "\" has dim " +
                        std::to_string(v.size()) + ", model expects " + std::to_string(want));
      }
      r.features[name] = std::move(v);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void SyntheticConfig::validate() const {
  if (num_attrs < 1) throw ConfigError("synthetic: need at least one attribute");
  if (attr_dim < 1 || global_dim < 1) throw ConfigError("synthetic: feature dims must be >= 1");
  if (train_n < 1 || test_n < 1) throw ConfigError("synthetic: sample counts must be >= 1");
  if (!(noise >= 0.0)) throw ConfigError("synthetic: noise must be >= 0");
  grid.validate();
  if (!c_star.empty()) {
    if (c_star.size() != num_attrs) {
      throw ConfigError("synthetic: c* has " + std::to_string(c_star.size()) + " entries for " +
                        std::to_string(num_attrs) + " attributes");
    }
    double sum = 0.0;
    for (double c : c_star) {
      if (!(c >= 0.0)) throw ConfigError("synthetic: c* entries must be >= 0");
      sum += c;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("synthetic: c* must sum to 1 (got " + std::to_string(sum) + ")");
    }
  }
}

std::vector<double> SyntheticConfig::contributions() const {
  if (!c_star.empty()) return c_star;
  // Skewed default so attributes matter unevenly, as real contributions do.
  std::vector<double> c(num_attrs);
  double sum = 0.0;
  for (std::size_t i = 0; i < num_attrs; ++i) {
    c[i] = static_cast<double>(num_attrs - i);
    sum += c[i];
  }
  for (double& v : c) v /= sum;
  return c;
}

namespace {

// The global feature is an intrinsically blurred holistic-quality vector —
// the stand-in for an imperfect backbone trained on overall labels. The blur
// is part of the embedding itself (it does not scale with the attribute
// noise knob): attribute features must stay the only clean carriers of
// per-attribute signal, which is what the ablation protocol measures.
constexpr double kGlobalBlur = 0.35;

struct SyntheticEmbeddings {
  // Attribute i feature = u[i]*s_i + v[i] (+ noise). The global feature
  // embeds all of s* through the aggregate the generator scores with:
  // global = G*(Σ_a c*_a s_a) + g0 + blur.
  std::vector<Tensor1> u, v;
  Tensor1 G;
  Tensor1 g0;
};

SyntheticEmbeddings draw_embeddings(const SyntheticConfig& cfg, Rng rng) {
  SyntheticEmbeddings e;
  for (std::size_t i = 0; i < cfg.num_attrs; ++i) {
    Tensor1 u(cfg.attr_dim), v(cfg.attr_dim);
    for (std::size_t d = 0; d < cfg.attr_dim; ++d) u[d] = rng.uniform(-1.0, 1.0);
    for (std::size_t d = 0; d < cfg.attr_dim; ++d) v[d] = rng.uniform(-1.0, 1.0);
    e.u.push_back(std::move(u));
    e.v.push_back(std::move(v));
  }
  e.G = Tensor1(cfg.global_dim);
  for (std::size_t d = 0; d < cfg.global_dim; ++d) e.G[d] = rng.uniform(-1.0, 1.0);
  e.g0 = Tensor1(cfg.global_dim);
  for (std::size_t d = 0; d < cfg.global_dim; ++d) e.g0[d] = rng.uniform(-1.0, 1.0);
  return e;
}

std::string sample_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%05zu", prefix, i);
  return buf;
}

void emit_split(const SyntheticConfig& cfg, const SyntheticEmbeddings& emb,
                const std::vector<double>& c_star, Rng rng, const char* prefix, std::size_t n,
                const std::filesystem::path& split_dir, Manifest& manifest,
                bool with_labels) {
  std::filesystem::create_directories(split_dir / "features");
  const double lo = cfg.grid.score_min();
  const double hi = cfg.grid.score_max();
  for (std::size_t k = 0; k < n; ++k) {
    ManifestEntry entry;
    entry.id = sample_id(prefix, k);
    std::vector<double> s(cfg.num_attrs);
    for (std::size_t i = 0; i < cfg.num_attrs; ++i) s[i] = rng.uniform(lo, hi);
    double overall = 0.0;
    for (std::size_t i = 0; i < cfg.num_attrs; ++i) overall += s[i] * c_star[i];
    entry.overall = std::min(std::max(overall, lo), hi);
    if (with_labels) {
      for (std::size_t i = 0; i < cfg.num_attrs; ++i) {
        entry.attributes["attr" + std::to_string(i + 1)] = s[i];
      }
    }
    for (std::size_t i = 0; i < cfg.num_attrs; ++i) {
      Tensor1 f(cfg.attr_dim);
      for (std::size_t d = 0; d < cfg.attr_dim; ++d) {
        f[d] = emb.u[i][d] * s[i] + emb.v[i][d] + cfg.noise * rng.gaussian();
      }
      const std::string name = "attr" + std::to_string(i + 1);
      const std::string rel = "features/" + entry.id + "." + name + ".f2sf";
      write_feature_file(split_dir / rel, f);
      entry.features[name] = rel;
    }
    double agg = 0.0;
    for (std::size_t a = 0; a < cfg.num_attrs; ++a) agg += c_star[a] * s[a];
    Tensor1 g(cfg.global_dim);
    for (std::size_t d = 0; d < cfg.global_dim; ++d) {
      g[d] = emb.g0[d] + emb.G[d] * agg + kGlobalBlur * rng.gaussian();
    }
    const std::string rel = "features/" + entry.id + ".global.f2sf";
    write_feature_file(split_dir / rel, g);
    entry.features["global"] = rel;
    manifest.entries.push_back(std::move(entry));
  }
}

}  // namespace

SyntheticPaths generate_synthetic(const SyntheticConfig& cfg,
                                  const std::filesystem::path& out_dir) {
  cfg.validate();
  const std::vector<double> c_star = cfg.contributions();
  const Rng master(cfg.seed);
  const SyntheticEmbeddings emb = draw_embeddings(cfg, master.fork(1));

  std::vector<std::string> attr_order;
  for (std::size_t i = 0; i < cfg.num_attrs; ++i) attr_order.push_back("attr" + std::to_string(i + 1));

  // Labels are collected once; the plain training manifest strips them (the
  // semi-supervised path must never see them), the supervised variant keeps
  // them. Both reference the same feature files.
  Manifest train_sup;
  train_sup.attribute_order = attr_order;
  emit_split(cfg, emb, c_star, master.fork(2), "train", cfg.train_n, out_dir / "train", train_sup,
             /*with_labels=*/true);
  Manifest train = train_sup;
  for (ManifestEntry& e : train.entries) e.attributes.clear();

  Manifest test;
  test.attribute_order = attr_order;
  emit_split(cfg, emb, c_star, master.fork(3), "test", cfg.test_n, out_dir / "test", test,
             /*with_labels=*/true);

  SyntheticPaths paths;
  paths.train_manifest = out_dir / "train" / "manifest.jsonl";
  paths.train_supervised_manifest = out_dir / "train" / "manifest_supervised.jsonl";
  paths.test_manifest = out_dir / "test" / "manifest.jsonl";
  write_manifest(paths.train_manifest, train);
  write_manifest(paths.train_supervised_manifest, train_sup);
  write_manifest(paths.test_manifest, test);
  return paths;
}

}  // namespace f2s
