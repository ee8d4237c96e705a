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

#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "ladapt/experiment.hpp"

using namespace ladapt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

ExperimentConfig tiny_config(const std::string& out) {
  ExperimentConfig cfg = parse_config(
      "[experiment]\n"
      "runs = 2\n"
      "seed = 3\n"
      "[method]\n"
      "name = l-dann\n"
      "epochs = 4\n"
      "selection_window = 2\n"
      "batch = 16\n"
      "[data]\n"
      "n = 60\n"
      "classes = 2\n"
      "dim = 4\n");
  cfg.out_dir = out;
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("empty config text yields the documented defaults") {
  ExperimentConfig cfg = parse_config("");
  CHECK(cfg.train.method == Method::kNone);
  CHECK(cfg.train.epochs == 100);
  CHECK(cfg.train.lr_main == 0.001);
  CHECK(cfg.train.lr_heads == 0.001);
  CHECK(cfg.train.momentum == 0.9);
  CHECK(cfg.train.weight_decay == 1e-4);
  CHECK(cfg.train.reduction == 16.0);
  CHECK(cfg.train.lambda == 10.0);
  CHECK(cfg.train.grl_scale == 1.0);
  CHECK(cfg.train.selection_window == 30);
  CHECK(cfg.runs == 10);
  CHECK(cfg.data.rotation == 45.0);
  CHECK(cfg.data.bias == 1.0);
  // Default model: two tapped dense/batchnorm/relu blocks.
  CHECK(cfg.model.input == Shape{8});
  CHECK(cfg.model.features.size() == 6);
}

TEST_CASE("single-key override leaves the rest at defaults") {
  ExperimentConfig cfg = parse_config("[method]\nlambda = 5\n");
  CHECK(cfg.train.lambda == 5.0);
  CHECK(cfg.train.epochs == 100);
  CHECK(cfg.train.momentum == 0.9);
}

TEST_CASE("negative epochs is a constraint error naming the key") {
  CHECK_THROWS_WITH_AS(parse_config("[method]\nepochs = -1\n"),
                       doctest::Contains("epochs"), ConfigError);
}

TEST_CASE("unknown keys are rejected with their line number") {
  try {
    parse_config("[method]\nname = none\nbogus = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string what = e.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("key_without_section = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nonsense]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[method]\nepochs ~ 5\n"), ConfigError);
}

TEST_CASE("type errors carry the line and key") {
  try {
    parse_config("[method]\n\nmomentum = fast\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string what = e.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("momentum") != std::string::npos);
  }
}

TEST_CASE("constraint violations are validated after parsing") {
  CHECK_THROWS_WITH_AS(
      parse_config("[method]\nepochs = 5\nselection_window = 10\n"),
      doctest::Contains("selection_window"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[experiment]\nruns = 0\n"),
                       doctest::Contains("runs"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[method]\nlambda = -1\n"),
                       doctest::Contains("lambda"), ConfigError);
}

TEST_CASE("image data ignores the blob rotation default but rejects overrides") {
  ExperimentConfig cfg = parse_config("[data]\nkind = blob-images\n");
  CHECK(cfg.data.rotation == 0.0);
  CHECK(cfg.model.input == Shape{8, 8, 3});
  CHECK_THROWS_WITH_AS(
      parse_config("[data]\nkind = blob-images\nrotation = 30\n"),
      doctest::Contains("rotation"), ConfigError);
}

TEST_CASE("model section parses the layer DSL") {
  ExperimentConfig cfg = parse_config(
      "[model]\n"
      "input = image:8x8x3\n"
      "features = conv3x3:16, batchnorm, relu:tap, conv1x1:4:tap, gap\n"
      "classifier = 12, 6\n");
  CHECK(cfg.model.input == Shape{8, 8, 3});
  REQUIRE(cfg.model.features.size() == 5);
  CHECK(cfg.model.features[0].kind == LayerKind::kConv3x3);
  CHECK(cfg.model.features[0].width == 16);
  CHECK(cfg.model.features[2].kind == LayerKind::kRelu);
  CHECK(cfg.model.features[2].tap);
  CHECK(cfg.model.features[3].kind == LayerKind::kConv1x1);
  CHECK(cfg.model.features[3].tap);
  CHECK(cfg.model.classifier == std::vector<std::size_t>{12, 6});
  CHECK_THROWS_AS(parse_config("[model]\nfeatures = dense\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nfeatures = warp:3\n"), ConfigError);
}

TEST_CASE("run_experiment writes the full artifact set") {
  std::string out = "/tmp/ladapt_exp_artifacts";
  fs::remove_all(out);
  ExperimentConfig cfg = tiny_config(out);
  int status = run_experiment(cfg);
  CHECK(status == 0);
  for (int run = 0; run < 2; ++run) {
    std::string dir = out + "/run_" + std::to_string(run);
    CHECK(fs::exists(dir + "/history.csv"));
    CHECK(fs::exists(dir + "/metrics.json"));
    CHECK(fs::exists(dir + "/model.json"));
    CHECK(fs::exists(dir + "/model.ladt"));
  }
  CHECK(fs::exists(out + "/summary.json"));

  // Pinned history schema for this model (two taps).
  std::string csv = slurp(out + "/run_0/history.csv");
  CHECK(csv.rfind("epoch,train_loss,val_acc,target_acc,domain_acc,w1_0,w1_1\n",
                  0) == 0);
  // 4 epochs + header.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  nlohmann::json summary =
      nlohmann::json::parse(std::ifstream(out + "/summary.json"));
  CHECK(summary["schema_version"] == 1);
  CHECK(summary["method"] == "l-dann");
  CHECK(summary["runs"] == 2);
  CHECK(summary["statuses"].size() == 2);
  CHECK(summary["target_accuracy"]["values"].size() == 2);
  CHECK(summary["target_accuracy"]["mean"].is_number());
  CHECK(summary["target_accuracy"]["std"].is_number());
  CHECK(summary["n_c_runs"] == 0);
}

TEST_CASE("re-running an experiment reproduces history.csv bit for bit") {
  std::string out1 = "/tmp/ladapt_exp_repro1";
  std::string out2 = "/tmp/ladapt_exp_repro2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  ExperimentConfig cfg = tiny_config(out1);
  run_experiment(cfg);
  cfg.out_dir = out2;
  run_experiment(cfg);
  CHECK(slurp(out1 + "/run_0/history.csv") == slurp(out2 + "/run_0/history.csv"));
  CHECK(slurp(out1 + "/run_1/history.csv") == slurp(out2 + "/run_1/history.csv"));
  CHECK(slurp(out1 + "/summary.json") == slurp(out2 + "/summary.json"));
}

TEST_CASE("different methods emit summaries with a shared schema") {
  auto run_one = [](Method method, const std::string& out) {
    fs::remove_all(out);
    ExperimentConfig cfg = tiny_config(out);
    cfg.train.method = method;
    CHECK(run_experiment(cfg) == 0);
    return nlohmann::json::parse(std::ifstream(out + "/summary.json"));
  };
  nlohmann::json a = run_one(Method::kNone, "/tmp/ladapt_exp_cmp_none");
  nlohmann::json b = run_one(Method::kLdann, "/tmp/ladapt_exp_cmp_ldann");
  // Same keys in both, so results are directly comparable.
  for (const auto& [key, value] : a.items()) {
    CHECK_MESSAGE(b.contains(key), key);
  }
  CHECK(a["method"] == "none");
  CHECK(b["method"] == "l-dann");
  CHECK(a["target_accuracy"]["mean"].is_number());
  CHECK(b["target_accuracy"]["mean"].is_number());
}

TEST_CASE("model snapshots preserve predictions exactly") {
  std::string out = "/tmp/ladapt_exp_snapshot";
  fs::remove_all(out);
  Dataset source = gen_blobs(60, 2, 4, 5);
  Model model({4},
              {{LayerKind::kDense, 8, false},
               {LayerKind::kBatchNorm, 0, false},
               {LayerKind::kRelu, 0, true}},
              {6}, 2, 17);
  TrainConfig tc;
  tc.epochs = 3;
  tc.selection_window = 1;
  TrainResult res = train(tc, source, gen_blobs(60, 2, 4, 6), std::move(model));
  save_model_snapshot(out, res.model);
  Model reloaded = load_model_snapshot(out);
  Metrics before = evaluate(res.model, source);
  Metrics after = evaluate(reloaded, source);
  CHECK(before.accuracy == after.accuracy);
  CHECK(before.confusion == after.confusion);
}

TEST_CASE("dataset files round-trip through the experiment helpers") {
  std::string path = "/tmp/ladapt_exp_dataset.ladt";
  Dataset ds = gen_blobs(30, 3, 4, 9);
  save_dataset(path, ds);
  Dataset loaded = load_dataset(path);
  CHECK(loaded.samples.values() == ds.samples.values());
  CHECK(loaded.labels == ds.labels);
  CHECK(loaded.n_classes == 3);
}

TEST_CASE("dataset loading rejects corrupt label metadata") {
  std::string path = "/tmp/ladapt_exp_badlabels.ladt";
  Dataset ds = gen_blobs(10, 2, 3, 4);
  // Labels present but n_classes missing.
  NamedTensors entries;
  entries.emplace_back("samples", ds.samples);
  Tensor labels({10});
  for (std::size_t i = 0; i < 10; ++i) labels[i] = static_cast<double>(ds.labels[i]);
  entries.emplace_back("labels", labels);
  save_tensors(path, entries);
  CHECK_THROWS_AS(load_dataset(path), IoError);
  // Label outside [0, n_classes).
  labels[0] = 9;
  entries[1].second = labels;
  entries.emplace_back("n_classes", Tensor::scalar(2));
  save_tensors(path, entries);
  CHECK_THROWS_AS(load_dataset(path), IoError);
}

TEST_CASE("a divergent experiment reports N/C and a nonzero status") {
  std::string out = "/tmp/ladapt_exp_divergent";
  fs::remove_all(out);
  ExperimentConfig cfg = parse_config(
      "[experiment]\nruns = 1\n"
      "[method]\nname = none\nepochs = 10\nselection_window = 5\n"
      "lr_main = 1000\n"
      "[data]\nn = 60\nclasses = 2\ndim = 4\n");
  cfg.out_dir = out;
  CHECK(run_experiment(cfg) == 1);
  nlohmann::json summary =
      nlohmann::json::parse(std::ifstream(out + "/summary.json"));
  CHECK(summary["statuses"][0] == "N/C");
  CHECK(summary["n_c_runs"] == 1);
  CHECK(summary["target_accuracy"]["values"][0].is_null());
}

}  // TEST_SUITE
