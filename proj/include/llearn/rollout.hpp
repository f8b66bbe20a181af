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
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "llearn/controller.hpp"
#include "llearn/delan.hpp"
#include "llearn/plants.hpp"
#include "llearn/trajectories.hpp"

namespace llearn {

/// One control-rate sample of a closed-loop run.
struct TelemetryRecord {
  double t = 0.0;
  Eigen::VectorXd q, qd, q_ref;
  double e = 0.0;  // ||q_ref - q||
  Eigen::VectorXd u;  // applied, after saturation
  Eigen::VectorXd s, dhat;
  double V = 0.0;
  double Vdot = std::numeric_limits<double>::quiet_NaN();
  double Vdot_pred = 0.0;
  bool saturated = false;

  /// Field-wise equality that treats two NaNs as equal.
  bool operator==(const TelemetryRecord& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    auto eq = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.size() == b.size() && a == b; };
    return t == o.t && eq(q, o.q) && eq(qd, o.qd) && eq(q_ref, o.q_ref) && e == o.e && eq(u, o.u) && eq(s, o.s) &&
           eq(dhat, o.dhat) && same(V, o.V) && same(Vdot, o.Vdot) && same(Vdot_pred, o.Vdot_pred) &&
           saturated == o.saturated;
  }
};

struct RolloutOptions {
  /// Applied to the controller output before saturation.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> perturb;
  bool record_transitions = false;
  double velocity_bound = 1e3;  // rad/s; exceeding it counts as divergence
  Eigen::VectorXd initial_offset;  // added to the starting position when set
};

struct RolloutResult {
  std::vector<TelemetryRecord> telemetry;
  std::vector<Transition> transitions;
  bool diverged = false;
  long diverged_step = -1;
  std::string reason;

  std::vector<double> errors() const {
    std::vector<double> e;
    e.reserve(telemetry.size());
    for (const auto& r : telemetry) e.push_back(r.e);
    return e;
  }
};

inline long control_steps(const TrajectoryConfig& traj, double dt_ctrl) {
  return std::lround(traj.duration / dt_ctrl);
}

/// Closed-loop run starting on the reference at t = 0 (plus any configured
/// offset). Divergence truncates
/// the run and is reported in the result rather than thrown.
template <Plant P>
RolloutResult rollout(const P& plant, Controller& ctrl, const TrajectoryConfig& traj, const RolloutOptions& opt = {}) {
  traj.validate();
  require(traj.dof() == plant.dof(), "rollout: trajectory and plant dof differ");
  const double dt = plant.dt_ctrl();
  const long steps = control_steps(traj, dt);
  const Eigen::VectorXd limits = plant.torque_limits();
  ctrl.reset();

  const ReferenceSample r0 = sample(traj, 0.0);
  PlantState x{r0.q, r0.qd, 0.0};
  if (opt.initial_offset.size() > 0) {
    require(opt.initial_offset.size() == x.q.size(), "rollout: initial offset has the wrong length");
    x.q += opt.initial_offset;
  }
  RolloutResult out;
  out.telemetry.reserve(static_cast<std::size_t>(steps));
  if (opt.record_transitions) out.transitions.reserve(static_cast<std::size_t>(steps));
  const auto n = static_cast<Eigen::Index>(plant.dof());
  double prev_V = std::numeric_limits<double>::quiet_NaN();

  for (long k = 0; k < steps; ++k) {
    try {
      const double t = static_cast<double>(k) * dt;
      const ReferenceSample ref = sample(traj, std::min(t, traj.duration));
      ControlOutput c = ctrl.compute(x, ref);
      Eigen::VectorXd u = opt.perturb ? opt.perturb(c.u) : c.u;
      if (!u.allFinite()) throw SimulationBlowUp("non-finite control", k);
      TelemetryRecord rec;
      u = saturate(u, limits, &rec.saturated);
      const DynamicsTriple truth = plant.dynamics(x.q, x.qd);
      const Eigen::VectorXd qdd = forward_accel(truth, x.qd, u);

      rec.t = t;
      rec.q = x.q;
      rec.qd = x.qd;
      rec.q_ref = ref.q;
      rec.e = (ref.q - x.q).norm();
      rec.u = u;
      rec.dhat = c.dhat;
      rec.s = c.sliding ? c.sliding->s : Eigen::VectorXd::Zero(n);
      const ControllerGains* g = ctrl.lyapunov_gains();
      if (g && c.estimate) {
        const Eigen::VectorXd z = c.dhat - model_error(truth, *c.estimate, qdd, x.qd);
        const auto ly = lyapunov_eval(c.estimate->D, g->A, g->H, rec.s, z, c.alpha);
        rec.V = ly.V;
        rec.Vdot_pred = ly.Vdot_predicted;
        rec.Vdot = (rec.V - prev_V) / dt;
        prev_V = rec.V;
      }
      if (opt.record_transitions) out.transitions.push_back({x.q, x.qd, qdd, u});
      out.telemetry.push_back(std::move(rec));

      x = step(plant, x, u, dt, k);
      if (!x.q.allFinite() || !x.qd.allFinite() || x.qd.cwiseAbs().maxCoeff() > opt.velocity_bound)
        throw SimulationBlowUp("state left the admissible region", k);
    } catch (const SimulationBlowUp& e) {
      out.diverged = true;
      out.diverged_step = e.step();
      out.reason = e.what();
      break;
    } catch (const GimbalProximity& e) {
      out.diverged = true;
      out.diverged_step = k;
      out.reason = e.what();
      break;
    } catch (const SingularInertia& e) {
      out.diverged = true;
      out.diverged_step = k;
      out.reason = e.what();
      break;
    }
  }
  return out;
}

/// Controller whose estimates are the plant's own matrices.
template <Plant P>
TripleEstimator exact_estimator(const P& plant) {
  return [plant](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) { return plant.dynamics(q, qd); };
}

inline TripleEstimator learned_estimator(const LearnedModel& model) {
  return [model](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) { return estimate_triple(model, q, qd); };
}

}  // namespace llearn
