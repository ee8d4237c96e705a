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

// Command-line entry point: train / eval / gen-data / check-grad.
// Exit codes: 0 success, 1 divergence or numeric failure, 2 usage/config.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ladapt/ladapt.hpp"

namespace {

using namespace ladapt;

int cmd_train(const std::string& config_path, std::uint64_t* seed,
              std::size_t* runs, std::string* out_dir, std::string* method,
              bool alg1_literal) {
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = parse_config_file(config_path);
  } else {
    cfg = parse_config("");  // built-in defaults
  }
  if (seed) cfg.train.seed = *seed;
  if (runs) cfg.runs = *runs;
  if (out_dir) cfg.out_dir = *out_dir;
  if (method) {
    detail::ConfigCursor cur;
    cur.key = "--method";
    cfg.train.method = detail::parse_method_name(*method, cur);
  }
  if (alg1_literal) cfg.train.alg1_literal = true;

  int status = run_experiment(cfg);
  std::cout << "wrote " << cfg.out_dir << "/summary.json ("
            << method_name(cfg.train.method) << ", " << cfg.runs
            << " runs)\n";
  if (status != 0) {
    std::cerr << "warning: at least one run did not converge (N/C)\n";
  }
  return status;
}

int cmd_eval(const std::string& snapshot_dir, const std::string& data_path) {
  Model model = load_model_snapshot(snapshot_dir);
  Dataset ds = load_dataset(data_path);
  Metrics m = evaluate(model, ds);
  nlohmann::json j = detail::metrics_to_json(m);
  j["schema_version"] = kArtifactSchemaVersion;
  j["samples"] = ds.size();
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_gen_data(const std::string& out_path, const std::string& kind,
                 std::size_t n, std::size_t classes, std::size_t dim,
                 std::uint64_t seed, double rotation, double bias,
                 double noise, double displacement) {
  Dataset ds;
  if (kind == "blobs") {
    ds = gen_blobs(n, classes, dim, seed);
  } else if (kind == "blob-images") {
    ds = gen_blob_images(n, classes, seed);
  } else {
    throw ConfigError("gen-data: unknown kind '" + kind +
                      "' (blobs|blob-images)");
  }
  if (rotation != 0 || bias != 0 || noise != 0 || displacement != 0) {
    ShiftSpec shift{rotation, bias, noise, displacement};
    ds = apply_shift(ds, shift, seed);
  }
  save_dataset(out_path, ds);
  std::cout << "wrote " << out_path << " (" << ds.size() << " samples)\n";
  return 0;
}

int cmd_check_grad(std::size_t seeds, double eps) {
  GradCheckReport report = run_gradient_suite(seeds, eps);
  std::printf("%-24s %s\n", "op", "max rel err");
  for (const auto& e : report.entries) {
    std::printf("%-24s %.3e\n", e.name.c_str(), e.max_rel_err);
  }
  double worst_double = 0.0;
  for (std::size_t width : {4u, 32u, 256u}) {
    double err = run_double_backprop_check(/*seed=*/7, width,
                                           DomainHead::hidden_width(width, 16));
    std::printf("double-backprop C'=%-6zu %.3e\n", width, err);
    worst_double = std::max(worst_double, err);
  }
  std::printf("worst first-order: %.3e (tolerance 1e-4)\n", report.worst());
  std::printf("worst double-backprop: %.3e (tolerance 1e-3)\n", worst_double);
  bool ok = report.worst() <= 1e-4 && worst_double <= 1e-3;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layer-wise unsupervised domain adaptation trainer"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand(
      "train", "run a (multi-run) training experiment from a config file");
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t runs = 0;
  std::string out_dir, method;
  bool alg1_literal = false;
  train_cmd->add_option("--config", config_path, "experiment config file");
  auto* seed_opt = train_cmd->add_option("--seed", seed, "base seed override");
  auto* runs_opt = train_cmd->add_option("--runs", runs, "repeat-run override");
  auto* out_opt = train_cmd->add_option("--out", out_dir, "output directory");
  auto* method_opt =
      train_cmd->add_option("--method", method,
                            "method override: none|dann|l-dann|l-wass");
  train_cmd->add_flag("--alg1-literal", alg1_literal,
                      "use the alternative (literal) sign convention");

  // eval
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a saved snapshot on a dataset");
  std::string snapshot_dir, data_path;
  eval_cmd->add_option("--snapshot", snapshot_dir,
                       "run directory holding model.json/model.ladt")
      ->required();
  eval_cmd->add_option("--data", data_path, "dataset tensor file")->required();

  // gen-data
  auto* gen_cmd =
      app.add_subcommand("gen-data", "materialize a synthetic dataset");
  std::string gen_out = "dataset.ladt", gen_kind = "blobs";
  std::size_t gen_n = 300, gen_classes = 3, gen_dim = 8;
  std::uint64_t gen_seed = 1;
  double gen_rotation = 0, gen_bias = 0, gen_noise = 0, gen_displacement = 0;
  gen_cmd->add_option("--out", gen_out, "output tensor file");
  gen_cmd->add_option("--kind", gen_kind, "blobs|blob-images");
  gen_cmd->add_option("--n", gen_n, "sample count");
  gen_cmd->add_option("--classes", gen_classes, "class count");
  gen_cmd->add_option("--dim", gen_dim, "vector dimension (blobs)");
  gen_cmd->add_option("--seed", gen_seed, "generation seed");
  gen_cmd->add_option("--rotation", gen_rotation, "shift: rotation degrees");
  gen_cmd->add_option("--bias", gen_bias, "shift: per-channel bias");
  gen_cmd->add_option("--noise", gen_noise, "shift: noise sigma");
  gen_cmd->add_option("--displace", gen_displacement,
                      "shift: class-conditional displacement");

  // check-grad
  auto* check_cmd = app.add_subcommand(
      "check-grad", "finite-difference audit of the autodiff op set");
  std::size_t check_seeds = 20;
  double check_eps = 1e-5;
  check_cmd->add_option("--seeds", check_seeds, "number of random seeds");
  check_cmd->add_option("--eps", check_eps, "probe step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) {
      return cmd_train(config_path, *seed_opt ? &seed : nullptr,
                       *runs_opt ? &runs : nullptr,
                       *out_opt ? &out_dir : nullptr,
                       *method_opt ? &method : nullptr, alg1_literal);
    }
    if (*eval_cmd) return cmd_eval(snapshot_dir, data_path);
    if (*gen_cmd) {
      return cmd_gen_data(gen_out, gen_kind, gen_n, gen_classes, gen_dim,
                          gen_seed, gen_rotation, gen_bias, gen_noise,
                          gen_displacement);
    }
    if (*check_cmd) return cmd_check_grad(check_seeds, check_eps);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
