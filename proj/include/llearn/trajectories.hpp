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
#include <numbers>
#include <string>
#include <string_view>

#include "llearn/errors.hpp"

namespace llearn {

enum class TrajectoryKind { kSine, kQuintic, kStep, kSineLinearYaw };

inline std::string_view to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kSine: return "sine";
    case TrajectoryKind::kQuintic: return "quintic";
    case TrajectoryKind::kStep: return "step";
    case TrajectoryKind::kSineLinearYaw: return "sine_linear_yaw";
  }
  return "unknown";
}

inline TrajectoryKind trajectory_kind_from(std::string_view s) {
  if (s == "sine") return TrajectoryKind::kSine;
  if (s == "quintic") return TrajectoryKind::kQuintic;
  if (s == "step") return TrajectoryKind::kStep;
  if (s == "sine_linear_yaw") return TrajectoryKind::kSineLinearYaw;
  throw InvalidInput("unknown trajectory kind '" + std::string(s) + "'");
}

/// Reference description. `start` is the initial pose for quintic and step
/// references; sine references oscillate about `start`.
struct TrajectoryConfig {
  TrajectoryKind kind = TrajectoryKind::kSine;
  double amplitude = 0.5;
  double period = 4.0;
  Eigen::VectorXd phase;
  Eigen::VectorXd start;
  Eigen::VectorXd target;
  double settle_time = 3.0;
  double step_time = 2.0;
  double yaw_rate = 0.1;
  double duration = 20.0;

  std::size_t dof() const { return static_cast<std::size_t>(start.size()); }

  void validate() const {
    require(start.size() > 0, "trajectory: start vector must be non-empty");
    require(period > 0.0, "trajectory: period must be positive");
    require(duration > 0.0, "trajectory: duration must be positive");
    require(phase.size() == start.size(), "trajectory: phase length must equal dof");
    if (kind == TrajectoryKind::kQuintic)
      require(settle_time > 0.0 && settle_time <= duration, "trajectory: settle_time must lie in (0, duration]");
    if (kind == TrajectoryKind::kQuintic || kind == TrajectoryKind::kStep)
      require(target.size() == start.size(), "trajectory: target length must equal dof");
    if (kind == TrajectoryKind::kStep) require(step_time >= 0.0 && step_time <= duration, "trajectory: bad step_time");
    if (kind == TrajectoryKind::kSineLinearYaw) require(start.size() == 3, "trajectory: sine_linear_yaw needs dof 3");
    require(start.allFinite() && phase.allFinite() && (target.size() == 0 || target.allFinite()),
            "trajectory: non-finite entries");
  }
};

struct ReferenceSample {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd qdd;
};

inline TrajectoryConfig arm_sine_reference() {
  TrajectoryConfig c;
  c.kind = TrajectoryKind::kSine;
  c.phase = Eigen::Vector2d(0.0, std::numbers::pi / 2);
  c.start = Eigen::Vector2d::Zero();
  return c;
}

inline TrajectoryConfig arm_quintic_reference() {
  TrajectoryConfig c;
  c.kind = TrajectoryKind::kQuintic;
  c.phase = Eigen::Vector2d::Zero();
  c.start = Eigen::Vector2d::Zero();
  c.target = Eigen::Vector2d(0.5, -0.5);
  c.settle_time = 3.0;
  return c;
}

inline TrajectoryConfig quad_step_reference() {
  TrajectoryConfig c;
  c.kind = TrajectoryKind::kStep;
  c.phase = Eigen::Vector3d::Zero();
  c.start = Eigen::Vector3d::Zero();
  c.target = Eigen::Vector3d(0.1, -0.1, 0.0);
  c.step_time = 2.0;
  return c;
}

inline TrajectoryConfig quad_sine_yaw_reference() {
  TrajectoryConfig c;
  c.kind = TrajectoryKind::kSineLinearYaw;
  c.amplitude = 0.1;
  c.period = 4.0;
  c.phase = Eigen::Vector3d(0.0, std::numbers::pi / 2, 0.0);
  c.start = Eigen::Vector3d::Zero();
  c.yaw_rate = 0.1;
  return c;
}

/// Reference position, velocity and acceleration at time t.
inline ReferenceSample sample(const TrajectoryConfig& c, double t) {
  if (!(t >= 0.0 && t <= c.duration * (1.0 + 1e-12)))
    throw InvalidInput("trajectory: t=" + std::to_string(t) + " outside [0, duration]");
  const Eigen::Index n = c.start.size();
  ReferenceSample r{c.start, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  const double w = 2.0 * std::numbers::pi / c.period;
  auto oscillate = [&](Eigen::Index i) {
    const double arg = w * t + c.phase[i];
    r.q[i] += c.amplitude * std::sin(arg);
    r.qd[i] = c.amplitude * w * std::cos(arg);
    r.qdd[i] = -c.amplitude * w * w * std::sin(arg);
  };
  switch (c.kind) {
    case TrajectoryKind::kSine:
      for (Eigen::Index i = 0; i < n; ++i) oscillate(i);
      break;
    case TrajectoryKind::kSineLinearYaw:
      oscillate(0);
      oscillate(1);
      r.q[2] += c.yaw_rate * t;
      r.qd[2] = c.yaw_rate;
      break;
    case TrajectoryKind::kQuintic: {
      if (t >= c.settle_time) {
        r.q = c.target;
        break;
      }
      // Minimum-jerk blend 10s^3 - 15s^4 + 6s^5 and its derivatives.
      const double T = c.settle_time, s = t / T;
      const double s2 = s * s, s3 = s2 * s;
      const double p = s3 * (10.0 - 15.0 * s + 6.0 * s2);
      const double dp = 30.0 * s2 * (1.0 - 2.0 * s + s2) / T;
      const double ddp = 60.0 * s * (1.0 - 3.0 * s + 2.0 * s2) / (T * T);
      const Eigen::VectorXd delta = c.target - c.start;
      r.q = c.start + p * delta;
      r.qd = dp * delta;
      r.qdd = ddp * delta;
      break;
    }
    case TrajectoryKind::kStep:
      if (t >= c.step_time) r.q = c.target;
      break;
  }
  return r;
}

}  // namespace llearn
