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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "llearn/controller.hpp"
#include "llearn/errors.hpp"
#include "llearn/metrics.hpp"
#include "llearn/rollout.hpp"

namespace llearn {

struct DeConfig {
  std::size_t population = 20;
  std::size_t generations = 60;
  double F = 0.7;
  double CR = 0.9;
  Eigen::VectorXd lo, hi;
  std::uint64_t seed = 1;

  void validate() const {
    require(population >= 4, "de: population must be >= 4");
    require(F > 0.0 && F <= 2.0, "de: F must lie in (0, 2]");
    require(CR >= 0.0 && CR <= 1.0, "de: CR must lie in [0, 1]");
    require(lo.size() > 0 && lo.size() == hi.size(), "de: bounds must be non-empty and equal length");
    require((lo.array() < hi.array()).all(), "de: every lower bound must be below its upper bound");
  }
};

struct DeResult {
  Eigen::VectorXd best;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> trace;  // best value after initialisation and after each generation
  std::size_t evaluations = 0;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// DE/rand/1/bin with greedy selection. All trial vectors of a generation are
/// drawn before any is scored, so the outcome does not depend on evaluation
/// order.
inline DeResult de_optimize(const Objective& f, const DeConfig& cfg) {
  cfg.validate();
  const auto dim = cfg.lo.size();
  const std::size_t np = cfg.population;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto score = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> pop(np, Eigen::VectorXd(dim));
  for (auto& x : pop)
    for (Eigen::Index j = 0; j < dim; ++j) x[j] = cfg.lo[j] + (cfg.hi[j] - cfg.lo[j]) * u01(rng);
  std::vector<double> fit(np);
  DeResult res;
  for (std::size_t i = 0; i < np; ++i) fit[i] = score(pop[i]);
  res.evaluations = np;
  auto record_best = [&] {
    for (std::size_t i = 0; i < np; ++i)
      if (fit[i] < res.best_value || res.best.size() == 0) {
        res.best_value = fit[i];
        res.best = pop[i];
      }
    res.trace.push_back(res.best_value);
  };
  record_best();

  std::uniform_int_distribution<std::size_t> pick(0, np - 1);
  std::uniform_int_distribution<Eigen::Index> pick_dim(0, dim - 1);
  std::vector<Eigen::VectorXd> trial(np);
  for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t a, b, c;
      do a = pick(rng); while (a == i);
      do b = pick(rng); while (b == i || b == a);
      do c = pick(rng); while (c == i || c == a || c == b);
      const Eigen::Index forced = pick_dim(rng);
      trial[i] = pop[i];
      for (Eigen::Index j = 0; j < dim; ++j) {
        if (j == forced || u01(rng) < cfg.CR) {
          const double v = pop[a][j] + cfg.F * (pop[b][j] - pop[c][j]);
          trial[i][j] = std::clamp(v, cfg.lo[j], cfg.hi[j]);
        }
      }
    }
    for (std::size_t i = 0; i < np; ++i) {
      const double v = score(trial[i]);
      if (v <= fit[i]) {
        pop[i] = trial[i];
        fit[i] = v;
      }
    }
    res.evaluations += np;
    record_best();
  }
  return res;
}

enum class PidMetric { kItae, kRmse };

/// Parameter layout [Kp..., Ki..., Kd...].
inline PidGains pid_from_params(const Eigen::VectorXd& p, const Eigen::VectorXd& tau_max) {
  const auto n = tau_max.size();
  require(p.size() == 3 * n, "pid params: expected 3 * dof entries");
  return PidGains::with_default_clamp(p.segment(0, n), p.segment(n, n), p.segment(2 * n, n), tau_max);
}

/// Search box: Kp in [0, 200], Ki in [0, 100], Kd in [0, 50], each scaled
/// per channel.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> pid_bounds(const Eigen::VectorXd& scale) {
  const auto n = scale.size();
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(3 * n), hi(3 * n);
  hi << 200.0 * scale, 100.0 * scale, 50.0 * scale;
  return {lo, hi};
}

/// Tracking index of one noiseless PID episode; +inf on divergence.
template <Plant P>
double pid_objective(const P& plant, const TrajectoryConfig& traj, const Eigen::VectorXd& params,
                     PidMetric metric = PidMetric::kItae) {
  PidController ctrl(pid_from_params(params, plant.torque_limits()), plant.dt_ctrl());
  const auto r = rollout(plant, ctrl, traj);
  if (r.diverged) return std::numeric_limits<double>::infinity();
  const auto e = r.errors();
  return metric == PidMetric::kItae ? itae(e, plant.dt_ctrl()) : rmse(e, plant.dt_ctrl());
}

}  // namespace llearn
