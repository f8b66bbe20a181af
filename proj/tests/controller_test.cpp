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

#include "llearn/controller.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "llearn/rollout.hpp"
#include "oracles.hpp"

namespace llearn {
namespace {

double rms_error(const RolloutResult& r) {
  double acc = 0.0;
  for (const auto& rec : r.telemetry) acc += rec.e * rec.e;
  return std::sqrt(acc / static_cast<double>(r.telemetry.size()));
}

// Least-squares slope of measured Vdot against the interval average of s^T s.
double vdot_slope(const RolloutResult& r, std::size_t first, std::size_t last) {
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = first; k < last; ++k) {
    const auto& a = r.telemetry[k - 1];
    const auto& b = r.telemetry[k];
    const double x = 0.5 * (a.s.squaredNorm() + b.s.squaredNorm());
    sxy += x * b.Vdot;
    sxx += x * x;
  }
  return sxy / sxx;
}

TEST(Gains, RejectsIndefiniteMatrices) {
  auto g = ControllerGains::diagonal(2, 5, 10, 5);
  g.H(1, 1) = -1.0;
  EXPECT_THROW(g.validate(1.0 / 48), InvalidInput);
  g = ControllerGains::diagonal(2, 5, 10, 5);
  g.Lambda(0, 1) = 1.0;
  EXPECT_THROW(g.validate(1.0 / 48), InvalidInput);
}

TEST(Gains, RejectsUnstableLeakage) {
  auto g = ControllerGains::diagonal(2, 5, 10, 5, 100.0);
  EXPECT_THROW(g.validate(1.0 / 48), InvalidInput);
}

TEST(SlidingVars, PerfectTracking) {
  const auto g = ControllerGains::diagonal(2, 5, 10, 5);
  const ReferenceSample ref{Eigen::Vector2d(0.3, 0.1), Eigen::Vector2d(1, 2), Eigen::Vector2d(-1, 4)};
  const auto sl = sliding_vars(g, {ref.q, ref.qd, 0.0}, ref);
  EXPECT_EQ(sl.s, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(sl.qdd_r, ref.qdd);
  EXPECT_EQ(sl.qd_r, ref.qd);
}

TEST(SlidingVars, UnitGain) {
  const auto g = ControllerGains::diagonal(2, 1, 1, 1);
  const ReferenceSample ref{Eigen::Vector2d(0.1, 0.0), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  const auto sl = sliding_vars(g, {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), 0.0}, ref);
  EXPECT_EQ(sl.s, Eigen::Vector2d(0.1, 0.0));
}

TEST(SlidingVars, MatchesIndependentRecomputation) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    ControllerGains g = ControllerGains::diagonal(3, 1, 1, 1);
    const Eigen::MatrixXd M = oracle::uniform_vector(rng, 9, -1, 1).reshaped(3, 3);
    g.Lambda = M * M.transpose() + Eigen::Matrix3d::Identity();
    const PlantState x{oracle::uniform_vector(rng, 3, -1, 1), oracle::uniform_vector(rng, 3, -1, 1), 0.0};
    const ReferenceSample ref{oracle::uniform_vector(rng, 3, -1, 1), oracle::uniform_vector(rng, 3, -1, 1),
                              oracle::uniform_vector(rng, 3, -1, 1)};
    const auto sl = sliding_vars(g, x, ref);
    const Eigen::VectorXd s = (ref.qd - x.qd) + g.Lambda * (ref.q - x.q);
    EXPECT_LE((sl.s - s).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Compensator, ZeroSlidingWithoutLeakageHoldsEstimate) {
  const auto g = ControllerGains::diagonal(2, 5, 10, 5, 0.0);
  const CompensatorState c{Eigen::Vector2d(0.3, -0.2), 1.0};
  const auto next = compensator_update(c, g, Eigen::Vector2d::Zero(), 0.1);
  EXPECT_EQ(next.dhat, c.dhat);
  EXPECT_DOUBLE_EQ(next.t, 1.1);
}

TEST(Compensator, OneEulerStep) {
  const auto g = ControllerGains::diagonal(2, 5, 2, 5, 0.0);
  const auto next = compensator_update(CompensatorState::zeros(2), g, Eigen::Vector2d(1, 0), 0.1);
  EXPECT_NEAR(next.dhat[0], 0.05, 1e-16);
  EXPECT_EQ(next.dhat[1], 0.0);
}

TEST(Compensator, RiemannSumOfConstantInput) {
  const auto g = ControllerGains::diagonal(2, 5, 4, 5, 0.0);
  const Eigen::Vector2d s(0.5, -1.0);
  auto c = CompensatorState::zeros(2);
  const double dt = 1.0 / 48.0;
  for (int k = 0; k < 480; ++k) c = compensator_update(c, g, s, dt);
  EXPECT_LE((c.dhat - 480 * dt * s / 4.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Compensator, LeakageDecaysEstimate) {
  const auto g = ControllerGains::diagonal(1, 5, 1, 5, 2.0, 10.0);
  const auto next = compensator_update({Eigen::VectorXd::Constant(1, 1.0), 0.0}, g, Eigen::VectorXd::Zero(1), 0.1);
  EXPECT_NEAR(next.dhat[0], 0.8, 1e-15);
  EXPECT_NEAR(leakage(g, 10.0), 2.0 / std::exp(1.0), 1e-15);
}

TEST(ControlLaw, PureFeedforwardOnReference) {
  const ArmPlant arm;
  const auto g = default_arm_gains();
  const ReferenceSample ref{Eigen::Vector2d(0.4, 0.2), Eigen::Vector2d(0.5, -0.3), Eigen::Vector2d(1.0, 2.0)};
  const auto est = arm.dynamics(ref.q, ref.qd);
  const auto sl = sliding_vars(g, {ref.q, ref.qd, 0.0}, ref);
  const Eigen::VectorXd u = control_law(est, g, sl, Eigen::Vector2d::Zero());
  EXPECT_LE((u - (est.D * ref.qdd + est.C * ref.qd + est.G)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ControlLaw, SuperpositionInCompensationAndSliding) {
  const ArmPlant arm;
  const auto g = default_arm_gains();
  const auto est = arm.dynamics(Eigen::Vector2d(0.4, 0.2), Eigen::Vector2d(0.5, -0.3));
  SlidingState sl{Eigen::Vector2d::Zero(), Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(-1, 1), Eigen::Vector2d::Zero()};
  const Eigen::Vector2d d1(0.3, -0.4), d2(1.0, 2.0), s1(0.2, 0.1);
  const Eigen::VectorXd base = control_law(est, g, sl, Eigen::Vector2d::Zero());
  EXPECT_LE((control_law(est, g, sl, d1 + d2) - (control_law(est, g, sl, d1) + control_law(est, g, sl, d2) - base))
                .cwiseAbs()
                .maxCoeff(),
            1e-13);
  SlidingState sl2 = sl;
  sl2.s = s1;
  EXPECT_LE((control_law(est, g, sl2, Eigen::Vector2d::Zero()) - base - g.H * s1).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ModelError, ZeroForExactEstimate) {
  const ArmPlant arm;
  const auto t = arm.dynamics(Eigen::Vector2d(0.4, 0.2), Eigen::Vector2d(0.5, -0.3));
  EXPECT_EQ(model_error(t, t, Eigen::Vector2d(1, 2), Eigen::Vector2d(0.5, -0.3)), Eigen::VectorXd::Zero(2));
}

TEST(ModelError, InertiaOffsetOnly) {
  const DynamicsTriple est{Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Zero(), Eigen::Vector2d::Zero()};
  const DynamicsTriple truth{2 * Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Zero(), Eigen::Vector2d::Zero()};
  EXPECT_EQ(model_error(truth, est, Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 3)), Eigen::Vector2d(1, 2));
}

TEST(ModelError, MatchesInverseDynamicsDifference) {
  const ArmPlant arm;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd q = oracle::uniform_vector(rng, 2, -2, 2), qd = oracle::uniform_vector(rng, 2, -2, 2);
    const Eigen::VectorXd qdd = oracle::uniform_vector(rng, 2, -5, 5);
    const auto truth = arm.dynamics(q, qd);
    DynamicsTriple est = truth;
    est.D += 0.1 * Eigen::Matrix2d::Identity();
    est.C += oracle::uniform_vector(rng, 4, -0.5, 0.5).reshaped(2, 2);
    est.G += oracle::uniform_vector(rng, 2, -1, 1);
    const Eigen::VectorXd want = apply_dynamics(truth, qd, qdd) - apply_dynamics(est, qd, qdd);
    EXPECT_LE((model_error(truth, est, qdd, qd) - want).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Lyapunov, ZeroAtOrigin) {
  const auto r = lyapunov_eval(Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity(),
                               Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), 1.0);
  EXPECT_EQ(r.V, 0.0);
  EXPECT_EQ(r.Vdot_predicted, 0.0);
}

TEST(Lyapunov, DirectQuadratic) {
  const auto r = lyapunov_eval(2 * Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity(),
                               3 * Eigen::Matrix2d::Identity(), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(r.V, 3.0);
  EXPECT_DOUBLE_EQ(r.Vdot_predicted, -3.0 - 0.5 * 4.0);
}

TEST(Lyapunov, EigenvalueLowerBound) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const Eigen::MatrixXd M = oracle::uniform_vector(rng, 9, -1, 1).reshaped(3, 3);
    const Eigen::MatrixXd D = M * M.transpose() + 0.01 * Eigen::Matrix3d::Identity();
    const Eigen::VectorXd s = oracle::uniform_vector(rng, 3, -1, 1);
    const auto r = lyapunov_eval(D, Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity(), s,
                                 oracle::uniform_vector(rng, 3, -1, 1), 0.0);
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(D).eigenvalues().minCoeff();
    EXPECT_GE(r.V, 0.5 * lmin * s.squaredNorm() - 1e-15);
  }
}

TEST(Pid, ZeroErrorGivesZeroTorque) {
  const auto g = PidGains::with_default_clamp(Eigen::Vector2d(10, 10), Eigen::Vector2d(5, 5), Eigen::Vector2d(1, 1),
                                              Eigen::Vector2d(30, 30));
  const ReferenceSample ref{Eigen::Vector2d(0.2, 0.1), Eigen::Vector2d(1, 1), Eigen::Vector2d::Zero()};
  Eigen::VectorXd I = Eigen::Vector2d::Zero();
  for (int k = 0; k < 100; ++k) {
    auto out = pid_control(g, {ref.q, ref.qd, 0.0}, ref, I, 1.0 / 48);
    EXPECT_EQ(out.u, Eigen::VectorXd::Zero(2));
    I = out.integral;
  }
}

TEST(Pid, ProportionalOnly) {
  const auto g = PidGains::with_default_clamp(Eigen::Vector2d(10, 10), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
                                              Eigen::Vector2d(30, 30));
  const ReferenceSample ref{Eigen::Vector2d(0.1, 0.0), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  const auto out = pid_control(g, {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), 0.0}, ref, Eigen::Vector2d::Zero(),
                               1.0 / 48);
  EXPECT_NEAR(out.u[0], 1.0, 1e-15);
  EXPECT_EQ(out.u[1], 0.0);
}

TEST(Pid, IntegralIsClamped) {
  const auto g = PidGains::with_default_clamp(Eigen::Vector2d::Zero(), Eigen::Vector2d(2, 2), Eigen::Vector2d::Zero(),
                                              Eigen::Vector2d(30, 30));
  EXPECT_DOUBLE_EQ(g.integral_clamp[0], 150.0);
  const ReferenceSample ref{Eigen::Vector2d(100.0, -100.0), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  Eigen::VectorXd I = Eigen::Vector2d::Zero();
  for (int k = 0; k < 1000; ++k)
    I = pid_control(g, {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), 0.0}, ref, I, 0.1).integral;
  EXPECT_DOUBLE_EQ(I[0], 150.0);
  EXPECT_DOUBLE_EQ(I[1], -150.0);
}

TEST(Pid, RejectsNegativeGains) {
  auto g = PidGains::with_default_clamp(Eigen::Vector2d(-1, 0), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
                                        Eigen::Vector2d(30, 30));
  EXPECT_THROW(PidController(g, 1.0 / 48), InvalidInput);
}

TEST(ClosedLoop, ExactModelTracksArmSine) {
  const ArmPlant arm;
  LyapunovController ctrl(exact_estimator(arm), default_arm_gains(), arm.dt_ctrl());
  const auto r = rollout(arm, ctrl, arm_sine_reference());
  ASSERT_FALSE(r.diverged);
  EXPECT_EQ(r.telemetry.size(), 960u);
  EXPECT_LE(rms_error(r), 1e-3);
  EXPECT_LE(r.telemetry.back().e, 1e-3);
}

TEST(ClosedLoop, LyapunovDecreaseWithFrozenCompensation) {
  const ArmPlant arm;
  auto g = default_arm_gains();
  g.alpha0 = 0.0;
  LyapunovController ctrl(exact_estimator(arm), g, arm.dt_ctrl(), true);
  const auto r = rollout(arm, ctrl, arm_sine_reference());
  ASSERT_FALSE(r.diverged);
  for (std::size_t k = 1; k < r.telemetry.size(); ++k) {
    const auto& a = r.telemetry[k - 1];
    const auto& b = r.telemetry[k];
    const double shs = 0.5 * (a.s.dot(g.H * a.s) + b.s.dot(g.H * b.s));
    EXPECT_LE(std::abs(b.Vdot + shs), 0.05 * std::max(1.0, shs)) << "step " << k;
    EXPECT_EQ(b.dhat, Eigen::VectorXd::Zero(2));
  }
}

TEST(ClosedLoop, DoublingDampingDoublesDecayRate) {
  const ArmPlant arm;
  RolloutOptions opt;
  opt.initial_offset = Eigen::Vector2d(0.2, -0.2);
  double slope[2];
  for (int i = 0; i < 2; ++i) {
    auto g = ControllerGains::diagonal(2, 20.0, 10.0, 1.0 + i, 0.0);
    LyapunovController ctrl(exact_estimator(arm), g, arm.dt_ctrl(), true);
    const auto r = rollout(arm, ctrl, arm_sine_reference(), opt);
    ASSERT_FALSE(r.diverged);
    slope[i] = vdot_slope(r, 1, r.telemetry.size());
  }
  EXPECT_LT(slope[0], 0.0);
  EXPECT_NEAR(slope[1] / slope[0], 2.0, 0.2);
}

TEST(ClosedLoop, ExactModelTracksQuadSineYaw) {
  const QuadPlant quad;
  LyapunovController ctrl(exact_estimator(quad), default_quad_gains(quad.params().J), quad.dt_ctrl());
  const auto r = rollout(quad, ctrl, quad_sine_yaw_reference());
  ASSERT_FALSE(r.diverged);
  EXPECT_LE(rms_error(r), 1e-3);
}

TEST(ClosedLoop, PidControllerResetsIntegral) {
  const ArmPlant arm;
  PidController pid(PidGains::with_default_clamp(Eigen::Vector2d(50, 50), Eigen::Vector2d(10, 10),
                                                 Eigen::Vector2d(5, 5), arm.torque_limits()),
                    arm.dt_ctrl());
  const auto a = rollout(arm, pid, arm_sine_reference());
  const auto b = rollout(arm, pid, arm_sine_reference());
  ASSERT_EQ(a.telemetry.size(), b.telemetry.size());
  EXPECT_TRUE(a.telemetry == b.telemetry);
}

}  // namespace
}  // namespace llearn
