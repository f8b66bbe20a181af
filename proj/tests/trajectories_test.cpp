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

#include "llearn/trajectories.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace llearn {
namespace {

// Central differences of q and qd at spacing h against the closed forms.
void expect_consistent_derivatives(const TrajectoryConfig& c, int points) {
  const double h = 1e-4;
  for (int i = 0; i < points; ++i) {
    const double t = h + (c.duration - 2 * h) * i / (points - 1);
    const auto lo = sample(c, t - h), mid = sample(c, t), hi = sample(c, t + h);
    EXPECT_LE(((hi.q - lo.q) / (2 * h) - mid.qd).cwiseAbs().maxCoeff(), 1e-6) << "t=" << t;
    EXPECT_LE(((hi.qd - lo.qd) / (2 * h) - mid.qdd).cwiseAbs().maxCoeff(), 1e-6) << "t=" << t;
  }
}

TEST(Trajectory, SineDerivativesAreConsistent) { expect_consistent_derivatives(arm_sine_reference(), 1000); }

TEST(Trajectory, QuinticDerivativesAreConsistent) {
  auto c = arm_quintic_reference();
  // Avoid straddling the settle point, where the third derivative jumps.
  c.duration = c.settle_time;
  expect_consistent_derivatives(c, 1000);
}

TEST(Trajectory, SineLinearYawDerivativesAreConsistent) { expect_consistent_derivatives(quad_sine_yaw_reference(), 1000); }

TEST(Trajectory, SineHarmonicIdentity) {
  auto c = arm_sine_reference();
  c.phase.setZero();
  const double w = 2 * std::numbers::pi / c.period;
  for (double t : {0.0, 0.3, 1.7, 9.9}) {
    const auto r = sample(c, t);
    EXPECT_LE((r.qdd + w * w * r.q).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Trajectory, QuinticBoundaryConditions) {
  const auto c = arm_quintic_reference();
  const auto a = sample(c, 0.0);
  EXPECT_EQ(a.q, c.start);
  EXPECT_EQ(a.qd, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(a.qdd, Eigen::VectorXd::Zero(2));
  for (double t : {c.settle_time, c.settle_time + 0.5, c.duration}) {
    const auto b = sample(c, t);
    EXPECT_LE((b.q - c.target).norm(), 1e-12);
    EXPECT_EQ(b.qd, Eigen::VectorXd::Zero(2));
    EXPECT_EQ(b.qdd, Eigen::VectorXd::Zero(2));
  }
  const auto mid = sample(c, c.settle_time / 2);
  EXPECT_LE((mid.q - 0.5 * (c.start + c.target)).norm(), 1e-15);
}

TEST(Trajectory, StepIsPiecewiseConstant) {
  const auto c = quad_step_reference();
  const auto before = sample(c, c.step_time - 1e-9), after = sample(c, c.step_time);
  EXPECT_EQ(before.q, c.start);
  EXPECT_EQ(after.q, c.target);
  for (double t : {0.0, 1.0, 3.0, 19.0}) {
    const auto r = sample(c, t);
    EXPECT_EQ(r.qd, Eigen::VectorXd::Zero(3));
    EXPECT_EQ(r.qdd, Eigen::VectorXd::Zero(3));
  }
}

TEST(Trajectory, YawGrowsLinearly) {
  const auto c = quad_sine_yaw_reference();
  EXPECT_NEAR(sample(c, 10.0).q[2], 1.0, 1e-15);
  EXPECT_EQ(sample(c, 3.0).qd[2], c.yaw_rate);
}

TEST(Trajectory, RejectsOutOfRangeTime) {
  const auto c = arm_sine_reference();
  EXPECT_THROW(sample(c, -0.1), InvalidInput);
  EXPECT_THROW(sample(c, c.duration + 1.0), InvalidInput);
}

TEST(Trajectory, ValidatesConfiguration) {
  auto c = arm_quintic_reference();
  c.settle_time = 0.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = arm_sine_reference();
  c.period = -1.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = arm_quintic_reference();
  c.target = Eigen::Vector3d::Zero();
  EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(Trajectory, KindNamesRoundTrip) {
  for (auto k : {TrajectoryKind::kSine, TrajectoryKind::kQuintic, TrajectoryKind::kStep, TrajectoryKind::kSineLinearYaw})
    EXPECT_EQ(trajectory_kind_from(to_string(k)), k);
  EXPECT_THROW(trajectory_kind_from("spiral"), InvalidInput);
}

}  // namespace
}  // namespace llearn
