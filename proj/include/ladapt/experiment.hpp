/* Copyright 2026 The ladapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef LADAPT_EXPERIMENT_HPP_
#define LADAPT_EXPERIMENT_HPP_

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ladapt/data.hpp"
#include "ladapt/metrics.hpp"
#include "ladapt/tensor_io.hpp"
#include "ladapt/trainer.hpp"

namespace ladapt {

constexpr int kArtifactSchemaVersion = 1;

struct DataConfig {
  enum class Kind { kBlobs, kBlobImages, kFiles };
  Kind kind = Kind::kBlobs;
  std::size_t n = 300;
  std::size_t target_n = 0;  // 0: same as n
  std::size_t classes = 3;
  std::size_t dim = 8;
  double rotation = 45.0;
  double bias = 1.0;
  double noise = 0.0;
  double displacement = 0.0;
  std::string source_path, target_path;
};

struct ModelConfig {
  Shape input;  // empty: derived from the data section
  std::vector<LayerSpec> features;
  std::vector<std::size_t> classifier;
};

struct ExperimentConfig {
  TrainConfig train;
  DataConfig data;
  ModelConfig model;
  std::string out_dir = "out";
  std::size_t runs = 10;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct ConfigCursor {
  int line = 0;
  std::string key;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                      "': " + msg);
  }

  std::size_t parse_size(const std::string& v) const {
    std::size_t out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      fail("expected a non-negative integer, got '" + v + "'");
    }
    return out;
  }

  double parse_double(const std::string& v) const {
    try {
      std::size_t used = 0;
      double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      fail("expected a number, got '" + v + "'");
    }
  }

  bool parse_bool(const std::string& v) const {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("expected true/false, got '" + v + "'");
  }
};

inline Method parse_method_name(const std::string& v, const ConfigCursor& c) {
  if (v == "none") return Method::kNone;
  if (v == "dann") return Method::kDann;
  if (v == "l-dann") return Method::kLdann;
  if (v == "l-wass") return Method::kLwass;
  c.fail("unknown method '" + v + "' (none|dann|l-dann|l-wass)");
}

inline LayerSpec parse_layer_token(const std::string& token,
                                   const ConfigCursor& c) {
  std::vector<std::string> parts = split_list(token, ':');
  if (parts.empty()) c.fail("empty layer token");
  LayerSpec spec;
  const std::string& kind = parts[0];
  if (kind == "dense") spec.kind = LayerKind::kDense;
  else if (kind == "conv1x1") spec.kind = LayerKind::kConv1x1;
  else if (kind == "conv3x3") spec.kind = LayerKind::kConv3x3;
  else if (kind == "relu") spec.kind = LayerKind::kRelu;
  else if (kind == "batchnorm") spec.kind = LayerKind::kBatchNorm;
  else if (kind == "gap") spec.kind = LayerKind::kGlobalAvgPool;
  else c.fail("unknown layer kind '" + kind + "'");
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "tap") {
      spec.tap = true;
    } else {
      spec.width = c.parse_size(parts[i]);
    }
  }
  bool needs_width = spec.kind == LayerKind::kDense ||
                     spec.kind == LayerKind::kConv1x1 ||
                     spec.kind == LayerKind::kConv3x3;
  if (needs_width && spec.width == 0) {
    c.fail("layer '" + kind + "' needs a positive width, e.g. " + kind +
           ":32");
  }
  return spec;
}

inline Shape parse_input_shape(const std::string& v, const ConfigCursor& c) {
  if (v.rfind("vector:", 0) == 0) {
    return {c.parse_size(v.substr(7))};
  }
  if (v.rfind("image:", 0) == 0) {
    std::vector<std::string> dims = split_list(v.substr(6), 'x');
    if (dims.size() != 3) c.fail("image input must be image:HxWxC");
    return {c.parse_size(dims[0]), c.parse_size(dims[1]),
            c.parse_size(dims[2])};
  }
  c.fail("input must be vector:D or image:HxWxC, got '" + v + "'");
}

}  // namespace detail

/// Parses the `key = value` / `[section]` experiment format. Every key has a
/// documented default; unknown keys and malformed values are rejected with
/// their line number. Constraints are re-validated after parsing.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  bool model_features_given = false;
  bool rotation_given = false, displacement_given = false;
  detail::ConfigCursor cur;
  std::string section;
  std::istringstream in(text);
  std::string raw;

  while (std::getline(in, raw)) {
    ++cur.line;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        cur.key = line;
        cur.fail("malformed section header");
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "experiment" && section != "method" &&
          section != "model" && section != "data") {
        cur.key = section;
        cur.fail("unknown section [" + section + "]");
      }
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      cur.key = line;
      cur.fail("expected key = value");
    }
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    cur.key = key;
    if (section.empty()) cur.fail("key outside of any [section]");

    if (section == "experiment") {
      if (key == "runs") cfg.runs = cur.parse_size(value);
      else if (key == "seed") cfg.train.seed = cur.parse_size(value);
      else if (key == "out") cfg.out_dir = value;
      else cur.fail("unknown key in [experiment]");
    } else if (section == "method") {
      if (key == "name") cfg.train.method = detail::parse_method_name(value, cur);
      else if (key == "epochs") cfg.train.epochs = cur.parse_size(value);
      else if (key == "batch") cfg.train.batch = cur.parse_size(value);
      else if (key == "n_critic") cfg.train.n_critic = cur.parse_size(value);
      else if (key == "lr_heads") cfg.train.lr_heads = cur.parse_double(value);
      else if (key == "lr_main") cfg.train.lr_main = cur.parse_double(value);
      else if (key == "momentum") cfg.train.momentum = cur.parse_double(value);
      else if (key == "weight_decay") cfg.train.weight_decay = cur.parse_double(value);
      else if (key == "lambda") cfg.train.lambda = cur.parse_double(value);
      else if (key == "beta") cfg.train.beta = cur.parse_double(value);
      else if (key == "r") cfg.train.reduction = cur.parse_double(value);
      else if (key == "grl_scale") cfg.train.grl_scale = cur.parse_double(value);
      else if (key == "selection_window") cfg.train.selection_window = cur.parse_size(value);
      else if (key == "alg1_literal") cfg.train.alg1_literal = cur.parse_bool(value);
      else if (key == "val_fraction") cfg.train.val_fraction = cur.parse_double(value);
      else cur.fail("unknown key in [method]");
    } else if (section == "model") {
      if (key == "input") cfg.model.input = detail::parse_input_shape(value, cur);
      else if (key == "features") {
        cfg.model.features.clear();
        for (const std::string& token : detail::split_list(value, ',')) {
          cfg.model.features.push_back(detail::parse_layer_token(token, cur));
        }
        model_features_given = true;
      } else if (key == "classifier") {
        cfg.model.classifier.clear();
        if (value != "none") {
          for (const std::string& token : detail::split_list(value, ',')) {
            cfg.model.classifier.push_back(cur.parse_size(token));
          }
        }
      } else cur.fail("unknown key in [model]");
    } else if (section == "data") {
      if (key == "kind") {
        if (value == "blobs") cfg.data.kind = DataConfig::Kind::kBlobs;
        else if (value == "blob-images") cfg.data.kind = DataConfig::Kind::kBlobImages;
        else if (value == "files") cfg.data.kind = DataConfig::Kind::kFiles;
        else cur.fail("unknown data kind '" + value + "'");
      } else if (key == "n") cfg.data.n = cur.parse_size(value);
      else if (key == "target_n") cfg.data.target_n = cur.parse_size(value);
      else if (key == "classes") cfg.data.classes = cur.parse_size(value);
      else if (key == "dim") cfg.data.dim = cur.parse_size(value);
      else if (key == "rotation") {
        cfg.data.rotation = cur.parse_double(value);
        rotation_given = true;
      }
      else if (key == "bias") cfg.data.bias = cur.parse_double(value);
      else if (key == "noise") cfg.data.noise = cur.parse_double(value);
      else if (key == "displacement") {
        cfg.data.displacement = cur.parse_double(value);
        displacement_given = true;
      }
      else if (key == "source_path") cfg.data.source_path = value;
      else if (key == "target_path") cfg.data.target_path = value;
      else cur.fail("unknown key in [data]");
    }
  }

  // Cross-key constraints, named after the offending key.
  auto constraint = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("constraint violated: " + what);
  };
  constraint(cfg.runs >= 1, "runs must be >= 1");
  constraint(cfg.train.epochs >= 1, "epochs must be >= 1");
  constraint(cfg.train.batch >= 1, "batch must be >= 1");
  constraint(cfg.train.n_critic >= 1, "n_critic must be >= 1");
  constraint(cfg.train.epochs >= cfg.train.selection_window &&
                 cfg.train.selection_window >= 1,
             "epochs must be >= selection_window >= 1");
  constraint(cfg.train.lr_main >= 0 && cfg.train.lr_heads >= 0,
             "lr_main and lr_heads must be >= 0");
  constraint(cfg.train.momentum >= 0 && cfg.train.weight_decay >= 0,
             "momentum and weight_decay must be >= 0");
  constraint(cfg.train.lambda >= 0, "lambda must be >= 0");
  constraint(cfg.train.reduction > 0, "r must be > 0");
  constraint(cfg.train.val_fraction > 0 && cfg.train.val_fraction < 1,
             "val_fraction must lie in (0, 1)");
  if (cfg.data.kind == DataConfig::Kind::kFiles) {
    constraint(!cfg.data.source_path.empty() && !cfg.data.target_path.empty(),
               "source_path and target_path are required for kind = files");
  }
  if (cfg.data.kind == DataConfig::Kind::kBlobImages) {
    // The blob defaults include a rotation; images only reject it when the
    // key was actually written.
    constraint(!rotation_given || cfg.data.rotation == 0.0,
               "rotation does not apply to image data");
    constraint(!displacement_given || cfg.data.displacement == 0.0,
               "displacement does not apply to image data");
    cfg.data.rotation = 0.0;
    cfg.data.displacement = 0.0;
  }

  // Default model: two tapped blocks sized for the configured data.
  if (!model_features_given) {
    if (cfg.data.kind == DataConfig::Kind::kBlobImages) {
      cfg.model.features = {
          {LayerKind::kConv3x3, 8, false}, {LayerKind::kBatchNorm, 0, false},
          {LayerKind::kRelu, 0, true},     {LayerKind::kConv3x3, 8, false},
          {LayerKind::kBatchNorm, 0, false}, {LayerKind::kRelu, 0, true},
          {LayerKind::kGlobalAvgPool, 0, false}};
    } else {
      cfg.model.features = {
          {LayerKind::kDense, 32, false}, {LayerKind::kBatchNorm, 0, false},
          {LayerKind::kRelu, 0, true},    {LayerKind::kDense, 32, false},
          {LayerKind::kBatchNorm, 0, false}, {LayerKind::kRelu, 0, true}};
    }
  }
  if (cfg.model.input.empty() && cfg.data.kind != DataConfig::Kind::kFiles) {
    cfg.model.input = cfg.data.kind == DataConfig::Kind::kBlobImages
                          ? Shape{8, 8, 3}
                          : Shape{cfg.data.dim};
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---- dataset and model snapshots -------------------------------------------

inline void save_dataset(const std::string& path, const Dataset& ds) {
  NamedTensors entries;
  entries.emplace_back("samples", ds.samples);
  if (ds.labeled()) {
    Tensor labels({ds.size()});
    for (std::size_t i = 0; i < ds.size(); ++i) {
      labels[i] = static_cast<double>(ds.labels[i]);
    }
    entries.emplace_back("labels", labels);
  }
  entries.emplace_back("n_classes",
                       Tensor::scalar(static_cast<double>(ds.n_classes)));
  entries.emplace_back("domain_id",
                       Tensor::scalar(static_cast<double>(ds.domain_id)));
  save_tensors(path, entries);
}

inline Dataset load_dataset(const std::string& path) {
  NamedTensors entries = load_tensors(path);
  Dataset ds;
  ds.samples = find_tensor(entries, "samples");
  if (has_tensor(entries, "n_classes")) {
    ds.n_classes = static_cast<std::size_t>(find_tensor(entries, "n_classes")[0]);
  }
  if (has_tensor(entries, "labels")) {
    const Tensor& labels = find_tensor(entries, "labels");
    if (labels.size() != ds.size()) {
      throw IoError(IoError::Kind::kBadShape,
                    "dataset " + path + ": labels do not match samples");
    }
    if (ds.n_classes < 2) {
      throw IoError(IoError::Kind::kBadShape,
                    "dataset " + path + ": labels without a valid n_classes");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      int label = static_cast<int>(labels[i]);
      if (label < 0 || static_cast<std::size_t>(label) >= ds.n_classes) {
        throw IoError(IoError::Kind::kBadShape,
                      "dataset " + path + ": label out of range");
      }
      ds.labels.push_back(label);
    }
  }
  if (has_tensor(entries, "domain_id")) {
    ds.domain_id = static_cast<std::uint64_t>(find_tensor(entries, "domain_id")[0]);
  }
  return ds;
}

namespace detail {

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j;
  j["kind"] = layer_kind_name(l.kind);
  j["width"] = l.width;
  j["tap"] = l.tap;
  return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec l;
  std::string kind = j.at("kind");
  if (kind == "dense") l.kind = LayerKind::kDense;
  else if (kind == "conv1x1") l.kind = LayerKind::kConv1x1;
  else if (kind == "conv3x3") l.kind = LayerKind::kConv3x3;
  else if (kind == "relu") l.kind = LayerKind::kRelu;
  else if (kind == "batchnorm") l.kind = LayerKind::kBatchNorm;
  else if (kind == "global-avg-pool") l.kind = LayerKind::kGlobalAvgPool;
  else throw ConfigError("model.json: unknown layer kind '" + kind + "'");
  l.width = j.at("width");
  l.tap = j.at("tap");
  return l;
}

}  // namespace detail

/// Writes dir/model.json (architecture) and dir/model.ladt (parameters and
/// batchnorm running statistics).
inline void save_model_snapshot(const std::string& dir, const Model& model) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["input"] = model.input_shape();
  j["n_classes"] = model.n_classes();
  j["features"] = nlohmann::json::array();
  for (const LayerSpec& l : model.features()) {
    j["features"].push_back(detail::layer_to_json(l));
  }
  j["classifier"] = model.classifier_hidden();
  std::ofstream out(dir + "/model.json");
  out << j.dump(2) << "\n";

  Model::State state = model.state();
  NamedTensors entries;
  for (const Param& p : state.params) entries.emplace_back(p.name, p.value);
  for (std::size_t i = 0; i < state.bn_mean.size(); ++i) {
    entries.emplace_back("__bn" + std::to_string(i) + ".mean", state.bn_mean[i]);
    entries.emplace_back("__bn" + std::to_string(i) + ".var", state.bn_var[i]);
  }
  save_tensors(dir + "/model.ladt", entries);
}

inline Model load_model_snapshot(const std::string& dir) {
  std::ifstream in(dir + "/model.json");
  if (!in) throw ConfigError("cannot open " + dir + "/model.json");
  nlohmann::json j = nlohmann::json::parse(in);
  Shape input = j.at("input").get<Shape>();
  std::vector<LayerSpec> features;
  for (const auto& lj : j.at("features")) {
    features.push_back(detail::layer_from_json(lj));
  }
  std::vector<std::size_t> classifier =
      j.at("classifier").get<std::vector<std::size_t>>();
  Model model(input, features, classifier, j.at("n_classes"), /*seed=*/0);

  NamedTensors entries = load_tensors(dir + "/model.ladt");
  Model::State state = model.state();
  for (Param& p : state.params) {
    const Tensor& stored = find_tensor(entries, p.name);
    if (!stored.same_shape(p.value)) {
      throw IoError(IoError::Kind::kBadShape,
                    "model.ladt: shape mismatch for '" + p.name + "'");
    }
    p.value = stored;
  }
  for (std::size_t i = 0; i < state.bn_mean.size(); ++i) {
    state.bn_mean[i] = find_tensor(entries, "__bn" + std::to_string(i) + ".mean");
    state.bn_var[i] = find_tensor(entries, "__bn" + std::to_string(i) + ".var");
  }
  model.set_state(state);
  return model;
}

// ---- experiment runner ------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline void write_history_csv(const std::string& path,
                              const std::vector<EpochRecord>& history,
                              std::size_t w1_columns) {
  std::ofstream out(path, std::ios::trunc);
  out << "epoch,train_loss,val_acc,target_acc,domain_acc";
  for (std::size_t j = 0; j < w1_columns; ++j) out << ",w1_" << j;
  out << "\n";
  for (const EpochRecord& r : history) {
    out << r.epoch << "," << format_double(r.train_loss) << ","
        << format_double(r.val_acc) << "," << format_double(r.target_acc)
        << "," << format_double(r.domain_acc);
    for (std::size_t j = 0; j < w1_columns; ++j) {
      out << ",";
      if (j < r.w1.size()) out << format_double(r.w1[j]);
    }
    out << "\n";
  }
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["accuracy"] = m.accuracy;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < m.n_classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < m.n_classes; ++p) {
      row.push_back(m.confusion[t * m.n_classes + p]);
    }
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

struct RunArtifacts {
  bool converged = false;
  double target_accuracy = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

}  // namespace detail

/// Builds the per-run source/target pair from the data section. The target
/// pool is drawn with an offset seed, then shifted.
inline std::pair<Dataset, Dataset> make_datasets(const ExperimentConfig& cfg,
                                                 std::uint64_t seed) {
  constexpr std::uint64_t kTargetSeedOffset = 1000;
  const DataConfig& d = cfg.data;
  switch (d.kind) {
    case DataConfig::Kind::kBlobs: {
      Dataset source = gen_blobs(d.n, d.classes, d.dim, seed);
      std::size_t tn = d.target_n ? d.target_n : d.n;
      ShiftSpec shift{d.rotation, d.bias, d.noise, d.displacement};
      Dataset target = apply_shift(
          gen_blobs(tn, d.classes, d.dim, seed + kTargetSeedOffset), shift,
          seed);
      return {std::move(source), std::move(target)};
    }
    case DataConfig::Kind::kBlobImages: {
      Dataset source = gen_blob_images(d.n, d.classes, seed);
      std::size_t tn = d.target_n ? d.target_n : d.n;
      ShiftSpec shift{0.0, d.bias, d.noise, 0.0};
      Dataset target = apply_shift(
          gen_blob_images(tn, d.classes, seed + kTargetSeedOffset), shift,
          seed);
      return {std::move(source), std::move(target)};
    }
    case DataConfig::Kind::kFiles: {
      Dataset source = load_dataset(d.source_path);
      Dataset target = load_dataset(d.target_path);
      if (!source.labeled()) {
        throw ConfigError("source dataset " + d.source_path +
                          " must carry labels");
      }
      return {std::move(source), std::move(target)};
    }
  }
  throw Error("make_datasets: unknown data kind");
}

inline Model build_model(const ExperimentConfig& cfg, const Dataset& source,
                         std::uint64_t seed) {
  Shape input = cfg.model.input;
  if (input.empty()) input = source.sample_shape();
  std::size_t classes = source.n_classes;
  if (classes < 2) {
    throw ConfigError("experiment: source dataset does not define n_classes");
  }
  return Model(input, cfg.model.features, cfg.model.classifier, classes, seed);
}

/// Executes `runs` seeded repetitions, writing per-run history.csv,
/// metrics.json and a model snapshot, plus an aggregate summary.json.
/// Returns 0 on success, 1 when any run failed to converge.
inline int run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  std::vector<detail::RunArtifacts> outcomes;
  std::size_t model_taps = 0;

  for (std::size_t run = 0; run < cfg.runs; ++run) {
    std::uint64_t seed = cfg.train.seed + run;
    std::string run_dir = cfg.out_dir + "/run_" + std::to_string(run);
    fs::create_directories(run_dir);

    auto [source, target] = make_datasets(cfg, seed);
    Model model = build_model(cfg, source, seed);
    model_taps = model.taps().size();
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    TrainResult res = train(tc, source, target, std::move(model));

    detail::write_history_csv(run_dir + "/history.csv", res.history,
                              model_taps);

    detail::RunArtifacts art;
    nlohmann::json mj;
    mj["schema_version"] = kArtifactSchemaVersion;
    mj["run"] = run;
    mj["seed"] = seed;
    if (res.diverged) {
      art.converged = false;
      art.note = res.divergence_note;
      mj["status"] = "N/C";
      mj["note"] = res.divergence_note;
    } else {
      art.converged = true;
      Metrics val = evaluate(res.model, split(source,
                                              {1.0 - tc.val_fraction,
                                               tc.val_fraction},
                                              seed)[1]);
      mj["status"] = "ok";
      mj["selected_epoch"] = res.selected_epoch;
      mj["source_val"] = detail::metrics_to_json(val);
      art.val_accuracy = val.accuracy;
      if (target.labeled()) {
        Metrics tm = evaluate(res.model, target);
        mj["target"] = detail::metrics_to_json(tm);
        art.target_accuracy = tm.accuracy;
      }
      save_model_snapshot(run_dir, res.model);
    }
    std::ofstream mout(run_dir + "/metrics.json");
    mout << mj.dump(2) << "\n";
    outcomes.push_back(art);
  }

  // Aggregate summary: mean and (population) standard deviation of the final
  // accuracy across converged runs; diverged runs are marked N/C.
  auto aggregate = [&](auto select) {
    nlohmann::json j;
    nlohmann::json values = nlohmann::json::array();
    std::vector<double> ok;
    for (const auto& art : outcomes) {
      double v = select(art);
      if (art.converged && !std::isnan(v)) {
        values.push_back(v);
        ok.push_back(v);
      } else {
        values.push_back(nullptr);
      }
    }
    j["values"] = values;
    if (!ok.empty()) {
      double mean = 0;
      for (double v : ok) mean += v;
      mean /= static_cast<double>(ok.size());
      double var = 0;
      for (double v : ok) var += (v - mean) * (v - mean);
      var /= static_cast<double>(ok.size());
      j["mean"] = mean;
      j["std"] = std::sqrt(var);
    } else {
      j["mean"] = nullptr;
      j["std"] = nullptr;
    }
    return j;
  };

  nlohmann::json summary;
  summary["schema_version"] = kArtifactSchemaVersion;
  summary["method"] = method_name(cfg.train.method);
  summary["alg1_literal"] = cfg.train.alg1_literal;
  summary["runs"] = cfg.runs;
  summary["base_seed"] = cfg.train.seed;
  nlohmann::json statuses = nlohmann::json::array();
  std::size_t nc = 0;
  for (const auto& art : outcomes) {
    statuses.push_back(art.converged ? "ok" : "N/C");
    nc += !art.converged;
  }
  summary["statuses"] = statuses;
  summary["n_c_runs"] = nc;
  summary["target_accuracy"] =
      aggregate([](const detail::RunArtifacts& a) { return a.target_accuracy; });
  summary["val_accuracy"] =
      aggregate([](const detail::RunArtifacts& a) { return a.val_accuracy; });
  std::ofstream sout(cfg.out_dir + "/summary.json");
  sout << summary.dump(2) << "\n";

  return nc > 0 ? 1 : 0;
}

}  // namespace ladapt

#endif  // LADAPT_EXPERIMENT_HPP_
