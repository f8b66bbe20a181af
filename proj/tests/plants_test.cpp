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

#include "llearn/plants.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"

namespace llearn {
namespace {

// Rod kinematics written out directly: CoM velocities plus spin about each CoM.
double arm_lagrangian(const ArmParams& p, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  const double lc1 = p.l1 / 2, lc2 = p.l2 / 2;
  const double a = q[0], ab = q[0] + q[1];
  const Eigen::Vector2d v1 = lc1 * qd[0] * Eigen::Vector2d(std::cos(a), std::sin(a));
  const Eigen::Vector2d v2 = p.l1 * qd[0] * Eigen::Vector2d(std::cos(a), std::sin(a)) +
                             lc2 * (qd[0] + qd[1]) * Eigen::Vector2d(std::cos(ab), std::sin(ab));
  const double K = 0.5 * p.m1 * v1.squaredNorm() + 0.5 * p.m2 * v2.squaredNorm() +
                   0.5 * p.J_link * qd[0] * qd[0] + 0.5 * p.J_link * (qd[0] + qd[1]) * (qd[0] + qd[1]);
  const double y1 = -lc1 * std::cos(a), y2 = -p.l1 * std::cos(a) - lc2 * std::cos(ab);
  const double P = p.g * (p.m1 * y1 + p.m2 * y2);
  return K - P;
}

Eigen::Matrix3d rotation(const Eigen::VectorXd& chi) {
  return (Eigen::AngleAxisd(chi[2], Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(chi[1], Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(chi[0], Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

// Body rates from R^T dR/dt with dR/dt by central differences.
Eigen::Vector3d body_rates(const Eigen::VectorXd& chi, const Eigen::VectorXd& chid) {
  const double h = 1e-6;
  const Eigen::Matrix3d Rdot = (rotation(chi + h * chid) - rotation(chi - h * chid)) / (2 * h);
  const Eigen::Matrix3d S = rotation(chi).transpose() * Rdot;
  return {S(2, 1), S(0, 2), S(1, 0)};
}

TEST(ArmDynamics, CoriolisVanishesAtRest) {
  const ArmPlant arm;
  const auto t = arm.dynamics(Eigen::Vector2d(0.4, -1.1), Eigen::Vector2d::Zero());
  EXPECT_EQ(t.C, Eigen::MatrixXd::Zero(2, 2));
}

TEST(ArmDynamics, HangingArmHasNoGravityTorque) {
  const ArmPlant arm;
  const auto t = arm.dynamics(Eigen::Vector2d::Zero(), Eigen::Vector2d(0.3, 0.2));
  EXPECT_EQ(t.G, Eigen::VectorXd::Zero(2));
}

TEST(ArmDynamics, MatchesFiniteDifferenceLagrangian) {
  const ArmParams p;
  const ArmPlant arm(p);
  std::mt19937_64 rng(3);
  oracle::Lagrangian L = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) { return arm_lagrangian(p, q, qd); };
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd q = oracle::uniform_vector(rng, 2, -3.0, 3.0);
    const Eigen::VectorXd qd = oracle::uniform_vector(rng, 2, -3.0, 3.0);
    const Eigen::VectorXd qdd = oracle::uniform_vector(rng, 2, -5.0, 5.0);
    const auto t = arm.dynamics(q, qd);
    EXPECT_LE(oracle::max_rel_error(t.D, oracle::inertia(L, q, qd)), 1e-6);
    EXPECT_LE(oracle::max_rel_error(t.C, oracle::coriolis(L, q, qd)), 1e-6);
    EXPECT_LE(oracle::max_rel_error(t.G, oracle::gravity(L, q, qd, {1.0, 1e-5})), 1e-6);
    EXPECT_LE(oracle::max_rel_error(apply_dynamics(t, qd, qdd), oracle::inverse_dynamics(L, q, qd, qdd, {1.0, 1e-5})),
              1e-6);
  }
}

// Shared structural check: D symmetric positive definite, D_dot - 2C skew.
template <Plant P>
void expect_lagrangian_structure(const P& plant, std::mt19937_64& rng, double angle_range, double scale) {
  const auto n = static_cast<Eigen::Index>(plant.dof());
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd q = oracle::uniform_vector(rng, n, -angle_range, angle_range);
    const Eigen::VectorXd qd = oracle::uniform_vector(rng, n, -3.0, 3.0);
    const Eigen::VectorXd x = oracle::uniform_vector(rng, n, -1.0, 1.0);
    const auto t = plant.dynamics(q, qd);
    EXPECT_LE((t.D - t.D.transpose()).norm(), 1e-12 * t.D.norm());
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(t.D).eigenvalues().minCoeff(), 0.0);
    // D_dot along qd by central differences in q.
    const double h = 1e-6;
    const Eigen::MatrixXd Ddot =
        (plant.dynamics(q + h * qd, qd).D - plant.dynamics(q - h * qd, qd).D) / (2 * h);
    const double skew = x.dot((Ddot - 2.0 * t.C) * x);
    EXPECT_LE(std::abs(skew), 1e-8 * scale * x.squaredNorm() * qd.norm());
  }
}

TEST(ArmDynamics, LagrangianStructure) {
  std::mt19937_64 rng(8);
  expect_lagrangian_structure(ArmPlant{}, rng, 3.0, 1.0);
}

TEST(QuadDynamics, IdentityAttitudeGivesBodyInertia) {
  const QuadPlant quad;
  const auto t = quad.dynamics(Eigen::Vector3d::Zero(), Eigen::Vector3d(0.1, 0.2, 0.3));
  EXPECT_EQ(t.D, Eigen::MatrixXd(quad.params().J.asDiagonal()));
}

TEST(QuadDynamics, NoPotential) {
  const QuadPlant quad;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto t = quad.dynamics(oracle::uniform_vector(rng, 3, -1.0, 1.0), oracle::uniform_vector(rng, 3, -2, 2));
    EXPECT_EQ(t.G, Eigen::VectorXd::Zero(3));
  }
}

TEST(QuadDynamics, KineticEnergyMatchesRotationMatrixRates) {
  const QuadPlant quad;
  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd chi = oracle::uniform_vector(rng, 3, -1.2, 1.2);
    const Eigen::VectorXd chid = oracle::uniform_vector(rng, 3, -2.0, 2.0);
    const Eigen::Vector3d w = body_rates(chi, chid);
    const double K = 0.5 * w.dot(quad.params().J.asDiagonal() * w);
    EXPECT_NEAR(quad.energy(chi, chid), K, 1e-9 * K + 1e-16);
  }
}

TEST(QuadDynamics, CoriolisMatchesFiniteDifferenceLagrangian) {
  const QuadPlant quad;
  std::mt19937_64 rng(13);
  // Scale up so the 1e-6 floor in max_rel_error is meaningful.
  oracle::Lagrangian L = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
    return 1e5 * quad.energy(q, qd);
  };
  for (int i = 0; i < 30; ++i) {
    const Eigen::VectorXd chi = oracle::uniform_vector(rng, 3, -1.2, 1.2);
    const Eigen::VectorXd chid = oracle::uniform_vector(rng, 3, -2.0, 2.0);
    const auto t = quad.dynamics(chi, chid);
    EXPECT_LE(oracle::max_rel_error(1e5 * t.C, oracle::coriolis(L, chi, chid)), 1e-6);
  }
}

TEST(QuadDynamics, LagrangianStructure) {
  std::mt19937_64 rng(9);
  expect_lagrangian_structure(QuadPlant{}, rng, 1.3, 1e-5);
}

TEST(QuadDynamics, RejectsGimbalProximity) {
  const QuadPlant quad;
  EXPECT_THROW(quad.dynamics(Eigen::Vector3d(0, 1.5, 0), Eigen::Vector3d::Zero()), GimbalProximity);
  EXPECT_NO_THROW(quad.dynamics(Eigen::Vector3d(0, 1.4, 0), Eigen::Vector3d::Zero()));
}

TEST(ForwardAccel, BalancedTorqueGivesZeroAcceleration) {
  const ArmPlant arm;
  const Eigen::Vector2d q(0.7, -0.4), qd(1.0, -2.0);
  const auto t = arm.dynamics(q, qd);
  const Eigen::VectorXd a = forward_accel(t, qd, t.C * qd + t.G);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ForwardAccel, DiagonalSolve) {
  DynamicsTriple t{2.0 * Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2)};
  const Eigen::VectorXd a = forward_accel(t, Eigen::Vector2d::Zero(), Eigen::Vector2d(4, 6));
  EXPECT_DOUBLE_EQ(a[0], 2.0);
  EXPECT_DOUBLE_EQ(a[1], 3.0);
}

TEST(ForwardAccel, RoundTripThroughInverseDynamics) {
  std::mt19937_64 rng(4);
  const ArmPlant arm;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd q = oracle::uniform_vector(rng, 2, -3, 3), qd = oracle::uniform_vector(rng, 2, -3, 3);
    const Eigen::VectorXd qdd = oracle::uniform_vector(rng, 2, -10, 10);
    const auto t = arm.dynamics(q, qd);
    EXPECT_LE((forward_accel(t, qd, apply_dynamics(t, qd, qdd)) - qdd).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ForwardAccel, SingularInertiaIsReported) {
  DynamicsTriple t{Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2)};
  EXPECT_THROW(forward_accel(t, Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones()), SingularInertia);
}

TEST(Step, GravityCompensationHoldsEquilibrium) {
  const ArmPlant arm;
  const PlantState s{Eigen::Vector2d(0.6, -0.3), Eigen::Vector2d::Zero(), 0.0};
  const Eigen::VectorXd u = arm.dynamics(s.q, s.qd).G;
  const PlantState next = step(arm, s, u);
  EXPECT_LE((next.q - s.q).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(next.qd.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_DOUBLE_EQ(next.t, 1.0 / 48.0);
}

TEST(Step, UnforcedArmConservesEnergy) {
  const ArmPlant arm;
  PlantState s{Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d::Zero(), 0.0};
  const double e0 = arm.energy(s.q, s.qd);
  double worst = 0.0;
  for (int k = 0; k < 480; ++k) {
    s = step(arm, s, Eigen::Vector2d::Zero());
    worst = std::max(worst, std::abs(arm.energy(s.q, s.qd) - e0) / std::abs(e0));
  }
  EXPECT_NEAR(s.t, 10.0, 1e-9);
  EXPECT_LE(worst, 1e-6);
}

TEST(Step, FourthOrderConvergence) {
  ArmParams fine_params;
  fine_params.dt_sim = 1.0 / 480.0;
  const ArmPlant coarse, fine(fine_params);
  PlantState a{Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(0.5, -0.5), 0.0}, b = a;
  const Eigen::Vector2d u(2.0, -1.0);
  for (int k = 0; k < 48; ++k) {
    a = step(coarse, a, u);
    b = step(fine, b, u);
  }
  EXPECT_LE((a.q - b.q).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LE((a.qd - b.qd).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Step, ClampsTorqueToActuatorLimit) {
  const ArmPlant arm;
  const PlantState s{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), 0.0};
  const PlantState big = step(arm, s, Eigen::Vector2d(1000.0, -1000.0));
  const PlantState lim = step(arm, s, Eigen::Vector2d(30.0, -30.0));
  EXPECT_EQ(big.q, lim.q);
  EXPECT_EQ(big.qd, lim.qd);
}

TEST(Step, Deterministic) {
  const QuadPlant quad;
  const PlantState s{Eigen::Vector3d(0.1, -0.2, 0.3), Eigen::Vector3d(0.5, 0.1, -0.2), 1.0};
  const Eigen::Vector3d u(1e-4, -2e-4, 5e-5);
  const PlantState a = step(quad, s, u), b = step(quad, s, u);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.qd, b.qd);
}

TEST(Step, BlowUpCarriesStepIndex) {
  const QuadPlant quad;
  const PlantState s{Eigen::Vector3d(0.0, 1.35, 0.0), Eigen::Vector3d(0.0, 50.0, 0.0), 0.0};
  try {
    step(quad, s, Eigen::Vector3d::Zero(), quad.dt_ctrl(), 12);
    FAIL() << "expected SimulationBlowUp";
  } catch (const SimulationBlowUp& e) {
    EXPECT_EQ(e.step(), 12);
  }
}

TEST(ArmParams, RejectsNonIntegerRateRatio) {
  ArmParams p;
  p.dt_ctrl = 1.0 / 50.0;
  EXPECT_THROW(ArmPlant{p}, InvalidInput);
}

TEST(RotorMix, HoverIsSymmetric) {
  const QuadParams p;
  const auto cmd = rotor_mix(p, p.m * p.g, Eigen::Vector3d::Zero());
  const double expect = std::sqrt(p.m * p.g / (4 * p.k_f));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(cmd.speeds[i], expect, 1e-9 * expect);
  EXPECT_FALSE(cmd.saturated);
}

TEST(RotorMix, RoundTripsUnsaturatedRequests) {
  const QuadParams p;
  std::mt19937_64 rng(6);
  const QuadPlant quad(p);
  const Eigen::VectorXd lim = quad.torque_limits();
  for (int i = 0; i < 50; ++i) {
    // Each axis alone may use its full margin; three together must share it.
    const Eigen::Vector3d tau = oracle::uniform_vector(rng, 3, -0.3, 0.3).cwiseProduct(lim);
    const auto cmd = rotor_mix(p, p.m * p.g, tau);
    ASSERT_FALSE(cmd.saturated);
    const Eigen::Vector4d w = rotor_wrench(p, cmd.speeds);
    EXPECT_NEAR(w[0], p.m * p.g, 1e-9);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(w[k + 1], tau[k], 1e-9);
  }
}

TEST(RotorMix, SaturatesAboveMaximumThrust) {
  const QuadParams p;
  const auto cmd = rotor_mix(p, 5.0 * p.T_max, Eigen::Vector3d::Zero());
  EXPECT_TRUE(cmd.saturated);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(cmd.thrusts[i], p.T_max);
}

}  // namespace
}  // namespace llearn
