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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "llearn/controller.hpp"
#include "llearn/errors.hpp"
#include "llearn/plants.hpp"
#include "llearn/trainer.hpp"
#include "llearn/trajectories.hpp"
#include "llearn/tuner.hpp"

namespace llearn {

inline constexpr int kConfigSchemaVersion = 1;

enum class PlantKind { kArm, kQuad };
enum class Method { kLLearning, kPid, kExactModel, kUntrained };

inline std::string_view to_string(PlantKind p) { return p == PlantKind::kArm ? "arm" : "quad"; }

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kLLearning: return "l_learning";
    case Method::kPid: return "pid";
    case Method::kExactModel: return "exact_model";
    case Method::kUntrained: return "untrained";
  }
  return "unknown";
}

/// Everything needed to reproduce one run.
struct ExperimentConfig {
  std::filesystem::path source;
  std::string text;  // verbatim config file, copied into the manifest
  std::string plant_params_text;

  std::string name;
  PlantKind plant = PlantKind::kArm;
  ArmParams arm;
  QuadParams quad;
  Method method = Method::kLLearning;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
  std::filesystem::path model_path;  // optional checkpoint for evaluate

  TrajectoryConfig trajectory;
  ControllerGains gains;
  TrainerConfig trainer;
  std::optional<std::size_t> budget;

  std::optional<PidGains> pid;
  DeConfig tuner;
  PidMetric tuner_metric = PidMetric::kItae;

  std::size_t fidelity_states = 500;

  std::size_t dof() const { return plant == PlantKind::kArm ? 2 : 3; }
  double dt_ctrl() const { return plant == PlantKind::kArm ? arm.dt_ctrl : quad.dt_ctrl; }
  Eigen::VectorXd torque_limits() const {
    return plant == PlantKind::kArm ? ArmPlant(arm).torque_limits() : QuadPlant(quad).torque_limits();
  }
};

namespace detail {

using boost::property_tree::ptree;

/// Reads typed values out of a parsed INI tree and accumulates every problem
/// instead of stopping at the first one.
class ConfigReader {
 public:
  ConfigReader(const ptree& tree, std::vector<std::string>& problems) : tree_(tree), problems_(problems) {}

  bool has_section(const std::string& s) const { return tree_.get_child_optional(s).has_value(); }

  bool has(const std::string& section, const std::string& key) const {
    auto sec = tree_.get_child_optional(section);
    return sec && sec->get_child_optional(ptree::path_type(key, '\0')).has_value();
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    auto v = sec->get_optional<std::string>(ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    std::string s = *v;
    const auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  }

  std::string text(const std::string& section, const std::string& key, const std::string& fallback) const {
    return raw(section, key).value_or(fallback);
  }

  double number(const std::string& section, const std::string& key, double fallback) {
    auto r = raw(section, key);
    if (!r) return fallback;
    const auto v = parse_numbers(*r);
    if (!v || v->size() != 1) {
      bad(section, key, "expected a number, got '" + *r + "'");
      return fallback;
    }
    return (*v)[0];
  }

  std::size_t count(const std::string& section, const std::string& key, std::size_t fallback) {
    auto r = raw(section, key);
    if (!r) return fallback;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(*r, &pos);
      if (pos != r->size() || v < 0) throw std::invalid_argument("");
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      bad(section, key, "expected a non-negative integer, got '" + *r + "'");
      return fallback;
    }
  }

  bool flag(const std::string& section, const std::string& key, bool fallback) {
    auto r = raw(section, key);
    if (!r) return fallback;
    if (*r == "true" || *r == "1") return true;
    if (*r == "false" || *r == "0") return false;
    bad(section, key, "expected true or false, got '" + *r + "'");
    return fallback;
  }

  /// Whitespace-separated list; a single value is broadcast to n entries.
  Eigen::VectorXd vector(const std::string& section, const std::string& key, const Eigen::VectorXd& fallback,
                         Eigen::Index n) {
    auto r = raw(section, key);
    if (!r) return fallback;
    const auto v = parse_numbers(*r);
    if (!v || v->empty()) {
      bad(section, key, "expected numbers, got '" + *r + "'");
      return fallback;
    }
    if (v->size() == 1) return Eigen::VectorXd::Constant(n, (*v)[0]);
    if (static_cast<Eigen::Index>(v->size()) != n) {
      bad(section, key, "expected " + std::to_string(n) + " values, got " + std::to_string(v->size()));
      return fallback;
    }
    return Eigen::Map<const Eigen::VectorXd>(v->data(), n);
  }

  std::vector<std::size_t> sizes(const std::string& section, const std::string& key,
                                 const std::vector<std::size_t>& fallback) {
    auto r = raw(section, key);
    if (!r) return fallback;
    std::istringstream is(*r);
    std::vector<std::size_t> out;
    long long v = 0;
    while (is >> v) {
      if (v <= 0) {
        bad(section, key, "layer widths must be positive");
        return fallback;
      }
      out.push_back(static_cast<std::size_t>(v));
    }
    if (!is.eof()) {
      bad(section, key, "expected integers, got '" + *r + "'");
      return fallback;
    }
    return out;
  }

  void check_keys(const std::string& section, const std::set<std::string>& known) {
    auto sec = tree_.get_child_optional(section);
    if (!sec) return;
    for (const auto& [k, v] : *sec)
      if (!known.count(k)) bad(section, k, "unknown key");
  }

  void check_sections(const std::set<std::string>& known) {
    for (const auto& [k, v] : tree_) {
      if (v.empty() && !v.data().empty()) {
        if (k != "schema_version") problems_.push_back("top-level key '" + k + "' is not allowed here");
        continue;
      }
      if (!known.count(k)) problems_.push_back("unknown section [" + k + "]");
    }
  }

  void bad(const std::string& section, const std::string& key, const std::string& what) {
    problems_.push_back("[" + section + "] " + key + ": " + what);
  }

  static std::optional<std::vector<double>> parse_numbers(const std::string& s) {
    std::istringstream is(s);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
      double v = 0.0;
      auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
      out.push_back(v);
    }
    return out;
  }

 private:
  const ptree& tree_;
  std::vector<std::string>& problems_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ptree parse_ini(const std::string& text, const std::string& label, std::vector<std::string>& problems) {
  ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    problems.push_back(label + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

inline void read_arm_params(ConfigReader& r, ArmParams& p) {
  r.check_keys("arm", {"m1", "m2", "l1", "l2", "J_link", "tau_max", "dt_sim", "dt_ctrl", "g"});
  p.m1 = r.number("arm", "m1", p.m1);
  p.m2 = r.number("arm", "m2", p.m2);
  p.l1 = r.number("arm", "l1", p.l1);
  p.l2 = r.number("arm", "l2", p.l2);
  p.J_link = r.number("arm", "J_link", p.J_link);
  p.tau_max = r.number("arm", "tau_max", p.tau_max);
  p.dt_sim = r.number("arm", "dt_sim", p.dt_sim);
  p.dt_ctrl = r.number("arm", "dt_ctrl", p.dt_ctrl);
  p.g = r.number("arm", "g", p.g);
}

inline void read_quad_params(ConfigReader& r, QuadParams& p) {
  r.check_keys("quad", {"m", "l_arm", "r_rotor", "J", "T_max", "k_f", "k_m", "dt_sim", "dt_ctrl", "g"});
  p.m = r.number("quad", "m", p.m);
  p.l_arm = r.number("quad", "l_arm", p.l_arm);
  p.r_rotor = r.number("quad", "r_rotor", p.r_rotor);
  p.J = r.vector("quad", "J", p.J, 3);
  p.T_max = r.number("quad", "T_max", p.T_max);
  p.k_f = r.number("quad", "k_f", p.k_f);
  p.k_m = r.number("quad", "k_m", p.k_m);
  p.dt_sim = r.number("quad", "dt_sim", p.dt_sim);
  p.dt_ctrl = r.number("quad", "dt_ctrl", p.dt_ctrl);
  p.g = r.number("quad", "g", p.g);
}

template <class F>
void collect(std::vector<std::string>& problems, const std::string& label, F&& check) {
  try {
    check();
  } catch (const InvalidInput& e) {
    const std::string what = e.what();
    problems.push_back(what.rfind(label + ":", 0) == 0 ? what : label + ": " + what);
  }
}

}  // namespace detail

/// Trainer defaults for each plant. The quadrotor's torques are five orders
/// of magnitude below the arm's, so the model output scale and the
/// exploration noise follow the actuator range.
inline TrainerConfig default_trainer(PlantKind p) {
  TrainerConfig t;
  if (p == PlantKind::kArm) {
    t.I0 = 10.0;
    t.E_min = 1e-3;
    t.epochs_per_iter = 60;
  } else {
    t.I0 = 3e-3;
    t.E_min = 1e-5;
    t.episodes_per_iter = 10;
    t.torque_scale = 1e-5;
  }
  return t;
}

inline TrajectoryConfig default_trajectory(PlantKind p, TrajectoryKind k) {
  if (p == PlantKind::kArm) {
    if (k == TrajectoryKind::kQuintic) return arm_quintic_reference();
    TrajectoryConfig c = arm_sine_reference();
    c.kind = k;
    if (k == TrajectoryKind::kStep) c.target = Eigen::Vector2d(0.5, -0.5);
    return c;
  }
  if (k == TrajectoryKind::kStep) return quad_step_reference();
  TrajectoryConfig c = quad_sine_yaw_reference();
  c.kind = k;
  if (k == TrajectoryKind::kQuintic) c.target = Eigen::Vector3d(0.1, -0.1, 0.5);
  return c;
}

/// Loads and validates an experiment file. Every problem found is reported
/// together in one ConfigError.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::vector<std::string> problems;
  ExperimentConfig cfg;
  cfg.source = path;
  if (!std::filesystem::is_regular_file(path)) throw ConfigError({"config file '" + path.string() + "' not found"});
  cfg.text = detail::slurp(path);
  const auto tree = detail::parse_ini(cfg.text, path.string(), problems);
  if (!problems.empty()) throw ConfigError(problems);
  detail::ConfigReader r(tree, problems);

  r.check_sections({"experiment", "trajectory", "gains", "trainer", "pid", "tuner", "evaluation"});
  const auto version = tree.get_optional<std::string>("schema_version");
  if (!version)
    problems.push_back("schema_version is required");
  else if (*version != std::to_string(kConfigSchemaVersion))
    problems.push_back("schema_version " + *version + " is not supported (expected " +
                       std::to_string(kConfigSchemaVersion) + ")");

  // [experiment]
  r.check_keys("experiment", {"name", "plant", "plant_params", "method", "seed", "out", "model"});
  const auto base = path.parent_path();
  cfg.name = r.text("experiment", "name", path.stem().string());
  const std::string plant = r.text("experiment", "plant", "");
  if (plant == "arm")
    cfg.plant = PlantKind::kArm;
  else if (plant == "quad")
    cfg.plant = PlantKind::kQuad;
  else
    r.bad("experiment", "plant", plant.empty() ? "is required" : "must be arm or quad, got '" + plant + "'");
  const std::string method = r.text("experiment", "method", "l_learning");
  if (method == "l_learning")
    cfg.method = Method::kLLearning;
  else if (method == "pid")
    cfg.method = Method::kPid;
  else if (method == "exact_model")
    cfg.method = Method::kExactModel;
  else if (method == "untrained")
    cfg.method = Method::kUntrained;
  else
    r.bad("experiment", "method", "unknown method '" + method + "'");
  cfg.seed = r.count("experiment", "seed", 1);
  cfg.out_dir = r.text("experiment", "out", "runs/" + cfg.name);
  if (cfg.out_dir.is_relative()) cfg.out_dir = (base / cfg.out_dir).lexically_normal();
  if (auto m = r.raw("experiment", "model")) {
    cfg.model_path = *m;
    if (cfg.model_path.is_relative()) cfg.model_path = base / cfg.model_path;
    if (!std::filesystem::is_regular_file(cfg.model_path))
      r.bad("experiment", "model", "file '" + cfg.model_path.string() + "' not found");
  }
  if (auto pp = r.raw("experiment", "plant_params")) {
    std::filesystem::path p = *pp;
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::is_regular_file(p)) {
      r.bad("experiment", "plant_params", "file '" + p.string() + "' not found");
    } else {
      cfg.plant_params_text = detail::slurp(p);
      const auto ptree = detail::parse_ini(cfg.plant_params_text, p.string(), problems);
      detail::ConfigReader pr(ptree, problems);
      pr.check_sections({"arm", "quad"});
      if (cfg.plant == PlantKind::kArm)
        detail::read_arm_params(pr, cfg.arm);
      else
        detail::read_quad_params(pr, cfg.quad);
    }
  }
  detail::collect(problems, "plant parameters", [&] {
    if (cfg.plant == PlantKind::kArm)
      cfg.arm.validate();
    else
      cfg.quad.validate();
  });
  const auto n = static_cast<Eigen::Index>(cfg.dof());

  // [trajectory]
  r.check_keys("trajectory", {"kind", "amplitude", "period", "phase", "start", "target", "settle_time", "step_time",
                              "yaw_rate", "duration"});
  TrajectoryKind kind = cfg.plant == PlantKind::kArm ? TrajectoryKind::kSine : TrajectoryKind::kSineLinearYaw;
  if (auto k = r.raw("trajectory", "kind")) {
    try {
      kind = trajectory_kind_from(*k);
    } catch (const InvalidInput& e) {
      r.bad("trajectory", "kind", e.what());
    }
  }
  auto& tr = cfg.trajectory;
  tr = default_trajectory(cfg.plant, kind);
  tr.amplitude = r.number("trajectory", "amplitude", tr.amplitude);
  tr.period = r.number("trajectory", "period", tr.period);
  tr.phase = r.vector("trajectory", "phase", tr.phase, n);
  tr.start = r.vector("trajectory", "start", tr.start, n);
  tr.target = r.vector("trajectory", "target", tr.target.size() ? tr.target : Eigen::VectorXd::Zero(n), n);
  tr.settle_time = r.number("trajectory", "settle_time", tr.settle_time);
  tr.step_time = r.number("trajectory", "step_time", tr.step_time);
  tr.yaw_rate = r.number("trajectory", "yaw_rate", tr.yaw_rate);
  tr.duration = r.number("trajectory", "duration", tr.duration);
  detail::collect(problems, "trajectory", [&] { tr.validate(); });

  // [gains]
  r.check_keys("gains", {"lambda", "A", "H", "alpha0", "alpha_decay"});
  cfg.gains = cfg.plant == PlantKind::kArm ? default_arm_gains() : default_quad_gains(cfg.quad.J);
  cfg.gains.Lambda = r.vector("gains", "lambda", cfg.gains.Lambda.diagonal(), n).asDiagonal();
  cfg.gains.A = r.vector("gains", "A", cfg.gains.A.diagonal(), n).asDiagonal();
  cfg.gains.H = r.vector("gains", "H", cfg.gains.H.diagonal(), n).asDiagonal();
  cfg.gains.alpha0 = r.number("gains", "alpha0", cfg.gains.alpha0);
  cfg.gains.alpha_decay = r.number("gains", "alpha_decay", cfg.gains.alpha_decay);
  detail::collect(problems, "gains", [&] { cfg.gains.validate(cfg.dt_ctrl()); });

  // [trainer]
  r.check_keys("trainer", {"K", "I0", "E_min", "episodes_per_iter", "epochs_per_iter", "batch_size",
                           "buffer_capacity", "hidden", "epsilon_pd", "torque_scale", "learning_rate", "budget"});
  auto& t = cfg.trainer;
  t = default_trainer(cfg.plant);
  t.K = r.count("trainer", "K", t.K);
  t.I0 = r.number("trainer", "I0", t.I0);
  t.E_min = r.number("trainer", "E_min", t.E_min);
  t.episodes_per_iter = r.count("trainer", "episodes_per_iter", t.episodes_per_iter);
  t.epochs_per_iter = r.count("trainer", "epochs_per_iter", t.epochs_per_iter);
  t.batch_size = r.count("trainer", "batch_size", t.batch_size);
  t.buffer_capacity = r.count("trainer", "buffer_capacity", t.buffer_capacity);
  t.hidden = r.sizes("trainer", "hidden", t.hidden);
  t.epsilon_pd = r.number("trainer", "epsilon_pd", t.epsilon_pd);
  t.torque_scale = r.number("trainer", "torque_scale", t.torque_scale);
  t.learning_rate = r.number("trainer", "learning_rate", t.learning_rate);
  if (r.has("trainer", "budget")) cfg.budget = r.count("trainer", "budget", 0);
  t.seed = cfg.seed;
  detail::collect(problems, "trainer", [&] { t.validate(); });

  // [pid]
  r.check_keys("pid", {"kp", "ki", "kd"});
  if (r.has_section("pid")) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    for (const char* k : {"kp", "ki", "kd"})
      if (!r.has("pid", k)) r.bad("pid", k, "is required when [pid] is present");
    auto g = PidGains::with_default_clamp(r.vector("pid", "kp", zero, n), r.vector("pid", "ki", zero, n),
                                          r.vector("pid", "kd", zero, n), cfg.torque_limits());
    detail::collect(problems, "pid", [&] { g.validate(); });
    cfg.pid = std::move(g);
  }
  if (cfg.method == Method::kPid && !cfg.pid) problems.push_back("method pid requires a [pid] section");

  // [tuner]
  r.check_keys("tuner", {"population", "generations", "F", "CR", "metric", "bound_scale"});
  auto& de = cfg.tuner;
  de.population = r.count("tuner", "population", de.population);
  de.generations = r.count("tuner", "generations", de.generations);
  de.F = r.number("tuner", "F", de.F);
  de.CR = r.number("tuner", "CR", de.CR);
  de.seed = cfg.seed;
  const Eigen::VectorXd default_scale =
      cfg.plant == PlantKind::kArm ? Eigen::VectorXd::Ones(n) : Eigen::VectorXd(cfg.quad.J);
  std::tie(de.lo, de.hi) = pid_bounds(r.vector("tuner", "bound_scale", default_scale, n));
  const std::string metric = r.text("tuner", "metric", "itae");
  if (metric == "itae")
    cfg.tuner_metric = PidMetric::kItae;
  else if (metric == "rmse")
    cfg.tuner_metric = PidMetric::kRmse;
  else
    r.bad("tuner", "metric", "must be itae or rmse");
  detail::collect(problems, "tuner", [&] { de.validate(); });

  // [evaluation]
  r.check_keys("evaluation", {"fidelity_states"});
  cfg.fidelity_states = r.count("evaluation", "fidelity_states", cfg.fidelity_states);
  if (cfg.fidelity_states == 0) r.bad("evaluation", "fidelity_states", "must be positive");

  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

}  // namespace llearn
