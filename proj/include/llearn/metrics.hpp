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

#include <cmath>
#include <random>
#include <span>

#include "llearn/controller.hpp"
#include "llearn/delan.hpp"
#include "llearn/errors.hpp"

namespace llearn {

/// Root-mean-square error, rectangle rule: sqrt(sum(e^2) dt / (N dt)).
inline double rmse(std::span<const double> e, double dt) {
  require(!e.empty(), "rmse: empty series");
  require(dt > 0.0, "rmse: dt must be positive");
  double acc = 0.0;
  for (double x : e) acc += x * x * dt;
  return std::sqrt(acc / (static_cast<double>(e.size()) * dt));
}

/// Integral of t |e(t)|, midpoint rule with t_i = (i + 1/2) dt.
inline double itae(std::span<const double> e, double dt) {
  require(!e.empty(), "itae: empty series");
  require(dt > 0.0, "itae: dt must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) acc += (static_cast<double>(i) + 0.5) * dt * std::abs(e[i]) * dt;
  return acc;
}

struct MetricReport {
  double rmse = 0.0;
  double itae = 0.0;
  std::size_t samples_used = 0;
  double wall_clock = 0.0;
  bool diverged = false;
};

struct FidelityReport {
  double inertia = 0.0;
  double coriolis = 0.0;
  double gravity = 0.0;
};

/// Axis-aligned box over (q, qd) from which held-out states are drawn.
struct StateBox {
  Eigen::VectorXd q_lo, q_hi, qd_lo, qd_hi;

  static StateBox around(std::span<const Transition> data) {
    require(!data.empty(), "state box: no transitions");
    StateBox b{data[0].q, data[0].q, data[0].qd, data[0].qd};
    for (const auto& t : data) {
      b.q_lo = b.q_lo.cwiseMin(t.q);
      b.q_hi = b.q_hi.cwiseMax(t.q);
      b.qd_lo = b.qd_lo.cwiseMin(t.qd);
      b.qd_hi = b.qd_hi.cwiseMax(t.qd);
    }
    return b;
  }
};

/// Mean Frobenius errors of an estimated triple against the plant over
/// n_states uniform draws from the box.
template <class P>
FidelityReport model_fidelity(const TripleEstimator& estimate, const P& plant, const StateBox& box,
                              std::size_t n_states, std::mt19937_64& rng) {
  require(n_states > 0, "model_fidelity: need at least one state");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto draw = [&](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * u01(rng);
    return x;
  };
  FidelityReport r;
  for (std::size_t i = 0; i < n_states; ++i) {
    const Eigen::VectorXd q = draw(box.q_lo, box.q_hi);
    const Eigen::VectorXd qd = draw(box.qd_lo, box.qd_hi);
    const auto truth = plant.dynamics(q, qd);
    const auto est = estimate(q, qd);
    r.inertia += (truth.D - est.D).norm();
    r.coriolis += (truth.C - est.C).norm();
    r.gravity += (truth.G - est.G).norm();
  }
  const double n = static_cast<double>(n_states);
  return {r.inertia / n, r.coriolis / n, r.gravity / n};
}

template <class P>
FidelityReport model_fidelity(const LearnedModel& model, const P& plant, const StateBox& box, std::size_t n_states,
                              std::mt19937_64& rng) {
  return model_fidelity(
      [&model](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) { return estimate_triple(model, q, qd); }, plant,
      box, n_states, rng);
}

}  // namespace llearn
