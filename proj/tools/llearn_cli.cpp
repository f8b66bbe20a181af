// Copyright 2026 The llearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "llearn/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigFailure = 2;
constexpr int kDivergence = 3;

void print_summary(const llearn::RunOutcome& out) {
  std::cout << "run: " << out.dir.string() << "\n";
  for (const auto& [k, v] : out.metrics) std::cout << "  " << k << " = " << v << "\n";
}

int finish(const llearn::RunOutcome& out) {
  print_summary(out);
  if (out.report.diverged) {
    std::cerr << "error: closed loop diverged during evaluation\n";
    return kDivergence;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"llearn: Lagrangian model learning and Lyapunov tracking control"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> budget;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment file")->required();
    sub->add_option("--seed", seed, "overrides the configured seed");
    sub->add_option("--out", out, "overrides the output directory");
    sub->add_option("--budget", budget, "sample budget for training");
  };
  auto* train = app.add_subcommand("train", "run the configured method end to end");
  add_run_flags(train);
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a fixed controller without training");
  add_run_flags(evaluate);
  auto* tune = app.add_subcommand("tune-pid", "tune PID gains by differential evolution");
  add_run_flags(tune);
  auto* compare = app.add_subcommand("compare", "tabulate finished runs");
  compare->add_option("--config", configs, "experiment files, one per row")->required();
  compare->add_option("--out", out, "directory for compare.csv and compare.txt");
  auto* plot = app.add_subcommand("plot", "render SVG figures from a run's telemetry");
  plot->add_option("--config", config, "experiment file whose run directory is plotted");
  plot->add_option("--out", out, "run directory to plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  llearn::RunOptions opt;
  opt.seed = seed;
  opt.budget = budget;
  if (out) opt.out = std::filesystem::path(*out);

  try {
    if (train->parsed() || evaluate->parsed() || tune->parsed()) {
      const auto cfg = llearn::load_config(config);
      if (train->parsed()) {
        opt.command = "train";
        return finish(llearn::run_train(cfg, opt));
      }
      if (evaluate->parsed()) {
        opt.command = "evaluate";
        return finish(llearn::run_evaluate(cfg, opt));
      }
      opt.command = "tune-pid";
      return finish(llearn::run_tune_pid(cfg, opt));
    }

    if (compare->parsed()) {
      std::vector<std::filesystem::path> paths(configs.begin(), configs.end());
      const auto rows = llearn::gather_runs(paths);
      const std::filesystem::path dir = out ? std::filesystem::path(*out) : std::filesystem::current_path();
      std::filesystem::create_directories(dir);
      std::ofstream csv(dir / "compare.csv");
      std::ostringstream text;
      llearn::write_comparison(csv, text, rows);
      std::ofstream(dir / "compare.txt") << text.str();
      std::cout << text.str();
      for (const auto& r : rows) {
        if (!r.present) {
          std::cerr << "error: no finished run for '" << r.config << "'\n";
          return kConfigFailure;
        }
      }
      return kOk;
    }

    std::filesystem::path dir;
    if (out) {
      dir = *out;
    } else if (!config.empty()) {
      dir = llearn::load_config(config).out_dir;
    } else {
      std::cerr << "error: plot needs --config or --out\n";
      return kConfigFailure;
    }
    std::ifstream in(dir / "telemetry.csv");
    if (!in) {
      std::cerr << "error: no telemetry.csv in '" << dir.string() << "'\n";
      return kConfigFailure;
    }
    std::size_t channels = 0;
    const auto records = llearn::parse_telemetry(in, &channels);
    for (const auto& p : llearn::plot_telemetry(records, channels, dir)) std::cout << p.string() << "\n";
    return kOk;
  } catch (const llearn::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const llearn::TrainingDivergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const llearn::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
