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

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "llearn/config.hpp"
#include "llearn/delan.hpp"
#include "llearn/metrics.hpp"
#include "llearn/plot.hpp"
#include "llearn/rollout.hpp"
#include "llearn/telemetry.hpp"
#include "llearn/trainer.hpp"
#include "llearn/tuner.hpp"

namespace llearn {

inline constexpr const char* kVersion = "1.0.0";

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> budget;
  std::string command = "train";
};

struct RunOutcome {
  std::filesystem::path dir;
  MetricReport report;
  std::map<std::string, std::string> metrics;  // everything written to metrics.txt
};

namespace detail {

template <class F>
decltype(auto) with_plant(const ExperimentConfig& cfg, F&& f) {
  if (cfg.plant == PlantKind::kArm) return f(ArmPlant(cfg.arm));
  return f(QuadPlant(cfg.quad));
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << content;
}

inline ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOptions& opt) {
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.trainer.seed = *opt.seed;
    cfg.tuner.seed = *opt.seed;
  }
  if (opt.out) cfg.out_dir = *opt.out;
  if (opt.budget) cfg.budget = *opt.budget;
  if (cfg.budget) {
    const auto steps = static_cast<std::size_t>(control_steps(cfg.trajectory, cfg.dt_ctrl()));
    cfg.trainer.K = TrainerConfig::iterations_for_budget(*cfg.budget, cfg.trainer.episodes_per_iter, steps);
  }
  return cfg;
}

inline void write_manifest(const ExperimentConfig& cfg, const RunOptions& opt, double wall_clock) {
  std::ostringstream m;
  m << "llearn_version=" << kVersion << "\n";
  m << "command=" << opt.command << "\n";
  m << "config=" << std::filesystem::absolute(cfg.source).string() << "\n";
  m << "name=" << cfg.name << "\n";
  m << "plant=" << to_string(cfg.plant) << "\n";
  m << "method=" << to_string(cfg.method) << "\n";
  m << "seed=" << cfg.seed << "\n";
  m << "budget=" << (cfg.budget ? std::to_string(*cfg.budget) : "none") << "\n";
  m << "iterations=" << cfg.trainer.K << "\n";
  m << "wall_clock=" << detail::format_double(wall_clock) << "\n";
  m << "rerun=llearn " << opt.command << " --config " << std::filesystem::absolute(cfg.source).string()
    << " --seed " << cfg.seed << (cfg.budget ? " --budget " + std::to_string(*cfg.budget) : "") << "\n";
  m << "--- config ---\n" << cfg.text;
  if (!cfg.plant_params_text.empty()) m << "--- plant_params ---\n" << cfg.plant_params_text;
  write_file(cfg.out_dir / "manifest.txt", m.str());
}

inline void write_metrics(const std::filesystem::path& dir, const std::map<std::string, std::string>& kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  write_file(dir / "metrics.txt", os.str());
}

inline std::map<std::string, std::string> read_metrics(const std::filesystem::path& file) {
  std::map<std::string, std::string> kv;
  std::ifstream in(file);
  if (!in) throw InvalidInput("cannot read '" + file.string() + "'");
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline void write_telemetry_file(const std::filesystem::path& p, const RolloutResult& r, std::size_t n) {
  std::ostringstream os;
  write_telemetry(os, r.telemetry, n);
  write_file(p, os.str());
}

inline void save_model(const std::filesystem::path& p, const LearnedModel& m) {
  std::ostringstream os;
  write_model(os, m);
  write_file(p, os.str());
}

inline LearnedModel load_model(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw InvalidInput("cannot read model '" + p.string() + "'");
  return read_model(in);
}

inline std::map<std::string, std::string> base_metrics(const ExperimentConfig& cfg, const Evaluation& ev,
                                                      std::size_t samples, double time) {
  return {{"method", std::string(to_string(cfg.method))},
          {"plant", std::string(to_string(cfg.plant))},
          {"trajectory", std::string(to_string(cfg.trajectory.kind))},
          {"name", cfg.name},
          {"seed", std::to_string(cfg.seed)},
          {"samples", std::to_string(samples)},
          {"rmse", detail::format_double(ev.rmse)},
          {"itae", detail::format_double(ev.itae)},
          {"time", detail::format_double(time)},
          {"diverged", ev.diverged ? "1" : "0"}};
}

inline MetricReport report_from(const Evaluation& ev, std::size_t samples, double time) {
  return {ev.rmse, ev.itae, samples, time, ev.diverged};
}

}  // namespace detail

/// Evaluates a fixed controller: the plant's own matrices, an untrained or
/// checkpointed model, or PID gains from the config.
inline RunOutcome run_evaluate(const ExperimentConfig& base_cfg, const RunOptions& opt = {}) {
  const auto cfg = detail::apply_overrides(base_cfg, opt);
  std::filesystem::create_directories(cfg.out_dir);
  return detail::with_plant(cfg, [&](const auto& plant) {
    std::unique_ptr<Controller> ctrl;
    switch (cfg.method) {
      case Method::kExactModel:
        ctrl = std::make_unique<LyapunovController>(exact_estimator(plant), cfg.gains, plant.dt_ctrl());
        break;
      case Method::kPid:
        ctrl = std::make_unique<PidController>(*cfg.pid, plant.dt_ctrl());
        break;
      case Method::kUntrained:
      case Method::kLLearning: {
        LearnedModel model = cfg.model_path.empty()
                                 ? LearnedModel::create(plant.dof(), cfg.trainer.hidden, cfg.seed,
                                                        cfg.trainer.epsilon_pd, cfg.trainer.torque_scale)
                                 : detail::load_model(cfg.model_path);
        require(model.dof == plant.dof(), "model dof does not match the plant");
        ctrl = std::make_unique<LyapunovController>(learned_estimator(model), cfg.gains, plant.dt_ctrl());
        break;
      }
    }
    const auto ev = evaluate_tracking(plant, *ctrl, cfg.trajectory);
    detail::write_telemetry_file(cfg.out_dir / "telemetry.csv", ev.run, plant.dof());
    RunOutcome out{cfg.out_dir, detail::report_from(ev, 0, 0.0), detail::base_metrics(cfg, ev, 0, 0.0)};
    detail::write_metrics(cfg.out_dir, out.metrics);
    detail::write_manifest(cfg, opt, 0.0);
    return out;
  });
}

/// Runs the configured method end to end. For l_learning this trains a
/// model and writes checkpoints, the training history and model fidelity.
inline RunOutcome run_train(const ExperimentConfig& base_cfg, const RunOptions& opt = {}) {
  if (base_cfg.method != Method::kLLearning) return run_evaluate(base_cfg, opt);
  const auto cfg = detail::apply_overrides(base_cfg, opt);
  std::filesystem::create_directories(cfg.out_dir / "checkpoints");
  return detail::with_plant(cfg, [&](const auto& plant) {
    auto on_iter = [&](const IterationRecord& rec, const LearnedModel& m) {
      detail::save_model(cfg.out_dir / "checkpoints" / ("model_iter_" + std::to_string(rec.k) + ".txt"), m);
    };
    const auto res = l_learning(cfg.trainer, plant, cfg.trajectory, cfg.gains, on_iter);
    detail::save_model(cfg.out_dir / "model_final.txt", res.model);
    {
      std::ostringstream h, l;
      write_history(h, res.history);
      write_losses(l, res.history);
      detail::write_file(cfg.out_dir / "history.csv", h.str());
      detail::write_file(cfg.out_dir / "losses.csv", l.str());
    }
    LyapunovController ctrl(learned_estimator(res.model), cfg.gains, plant.dt_ctrl());
    const auto ev = evaluate_tracking(plant, ctrl, cfg.trajectory);
    detail::write_telemetry_file(cfg.out_dir / "telemetry.csv", ev.run, plant.dof());

    std::mt19937_64 rng_trained(cfg.seed + 1), rng_initial(cfg.seed + 1);
    const auto fid = model_fidelity(res.model, plant, res.state_box, cfg.fidelity_states, rng_trained);
    const auto fid0 = model_fidelity(res.initial_model, plant, res.state_box, cfg.fidelity_states, rng_initial);

    RunOutcome out{cfg.out_dir, detail::report_from(ev, res.samples_used, res.wall_clock),
                   detail::base_metrics(cfg, ev, res.samples_used, res.wall_clock)};
    out.metrics["iterations"] = std::to_string(res.history.size());
    out.metrics["best_iteration"] = std::to_string(res.best_iteration);
    out.metrics["early_stopped"] = res.early_stopped ? "1" : "0";
    out.metrics["fidelity_D"] = detail::format_double(fid.inertia);
    out.metrics["fidelity_C"] = detail::format_double(fid.coriolis);
    out.metrics["fidelity_G"] = detail::format_double(fid.gravity);
    out.metrics["untrained_fidelity_D"] = detail::format_double(fid0.inertia);
    out.metrics["untrained_fidelity_C"] = detail::format_double(fid0.coriolis);
    out.metrics["untrained_fidelity_G"] = detail::format_double(fid0.gravity);
    detail::write_metrics(cfg.out_dir, out.metrics);
    detail::write_manifest(cfg, opt, res.wall_clock);
    return out;
  });
}

/// Differential-evolution search over PID gains; the best gains are written
/// as a [pid] block that can be pasted into an experiment file.
inline RunOutcome run_tune_pid(const ExperimentConfig& base_cfg, const RunOptions& opt = {}) {
  const auto cfg = detail::apply_overrides(base_cfg, opt);
  std::filesystem::create_directories(cfg.out_dir);
  return detail::with_plant(cfg, [&](const auto& plant) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = de_optimize(
        [&](const Eigen::VectorXd& p) { return pid_objective(plant, cfg.trajectory, p, cfg.tuner_metric); },
        cfg.tuner);
    const double time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto gains = pid_from_params(res.best, plant.torque_limits());
    PidController ctrl(gains, plant.dt_ctrl());
    const auto ev = evaluate_tracking(plant, ctrl, cfg.trajectory);
    detail::write_telemetry_file(cfg.out_dir / "telemetry.csv", ev.run, plant.dof());
    {
      std::ostringstream os;
      write_trace(os, res.trace);
      detail::write_file(cfg.out_dir / "de_trace.csv", os.str());
    }
    auto list = [](const Eigen::VectorXd& v) {
      std::string s;
      for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + detail::format_double(v[i]);
      return s;
    };
    detail::write_file(cfg.out_dir / "pid_gains.ini",
                       "[pid]\nkp = " + list(gains.Kp) + "\nki = " + list(gains.Ki) + "\nkd = " + list(gains.Kd) + "\n");
    const std::size_t samples = res.evaluations * static_cast<std::size_t>(control_steps(cfg.trajectory, plant.dt_ctrl()));
    RunOutcome out{cfg.out_dir, detail::report_from(ev, samples, time), detail::base_metrics(cfg, ev, samples, time)};
    out.metrics["method"] = "pid";
    out.metrics["objective"] = detail::format_double(res.best_value);
    out.metrics["evaluations"] = std::to_string(res.evaluations);
    detail::write_metrics(cfg.out_dir, out.metrics);
    RunOptions tagged = opt;
    tagged.command = "tune-pid";
    detail::write_manifest(cfg, tagged, time);
    return out;
  });
}

struct CompareRow {
  std::string config;
  bool present = false;
  std::map<std::string, std::string> metrics;
};

inline constexpr const char* kGapMarker = "MISSING";

/// Gathers finished runs into a table with columns Method, Trajectory,
/// Samples, RMSE, ITAE, Time. Missing runs keep their row, filled with the
/// gap marker.
inline std::vector<CompareRow> gather_runs(const std::vector<std::filesystem::path>& configs) {
  std::vector<CompareRow> rows;
  for (const auto& c : configs) {
    CompareRow row{c.string(), false, {}};
    try {
      const auto cfg = load_config(c);
      const auto file = cfg.out_dir / "metrics.txt";
      if (std::filesystem::is_regular_file(file)) {
        row.metrics = detail::read_metrics(file);
        row.present = true;
      }
    } catch (const Error&) {
      row.present = false;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_comparison(std::ostream& csv, std::ostream& text, const std::vector<CompareRow>& rows) {
  const std::vector<std::string> keys{"method", "trajectory", "samples", "rmse", "itae", "time"};
  const std::vector<std::string> heads{"Method", "Trajectory", "Samples", "RMSE", "ITAE", "Time"};
  csv << "Config,Method,Trajectory,Samples,RMSE,ITAE,Time\n";
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::vector<std::string> line{r.config};
    for (const auto& k : keys) {
      auto it = r.metrics.find(k);
      line.push_back(r.present && it != r.metrics.end() ? it->second : kGapMarker);
    }
    for (std::size_t i = 0; i < line.size(); ++i) csv << (i ? "," : "") << line[i];
    csv << "\n";
    cells.push_back(std::move(line));
  }
  std::vector<std::string> all_heads{"Config"};
  all_heads.insert(all_heads.end(), heads.begin(), heads.end());
  std::vector<std::size_t> width(all_heads.size());
  for (std::size_t i = 0; i < width.size(); ++i) {
    width[i] = all_heads[i].size();
    for (const auto& c : cells) width[i] = std::max(width[i], c[i].size());
  }
  auto emit = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) text << (i ? "  " : "") << v[i] << std::string(width[i] - v[i].size(), ' ');
    text << "\n";
  };
  emit(all_heads);
  for (const auto& c : cells) emit(c);
}

}  // namespace llearn
