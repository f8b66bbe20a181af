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

// Ground-truth plants: a planar two-link arm and a quadrotor attitude model,
// both written as D(q) qdd + C(q, qd) qd + G(q) = u, plus a fixed-step RK4
// integrator that holds the control constant over one control period.

#ifndef LLEARN_PLANTS_HPP_
#define LLEARN_PLANTS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <numbers>
#include <vector>

#include "llearn/dynamics.hpp"
#include "llearn/errors.hpp"

namespace llearn {

struct PlantState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  double t = 0.0;
};

namespace detail {

inline long substeps_per_control(double dt_sim, double dt_ctrl) {
  require(dt_sim > 0.0 && dt_ctrl > 0.0, "time steps must be positive");
  const double ratio = dt_ctrl / dt_sim;
  const long n = std::lround(ratio);
  require(n >= 1 && std::abs(ratio - static_cast<double>(n)) <= 1e-9 * ratio,
          "dt_ctrl must be an integer multiple of dt_sim");
  return n;
}

}  // namespace detail

// Two uniform rods. alpha: link 1 from the downward vertical; beta: link 2
// relative to link 1; counterclockwise positive. alpha = beta = 0 hangs down.
struct ArmParams {
  double m1 = 1.0;
  double m2 = 1.0;
  double l1 = 1.0;
  double l2 = 1.0;
  double J_link = 0.083;
  double tau_max = 30.0;
  double dt_sim = 1.0 / 240.0;
  double dt_ctrl = 1.0 / 48.0;
  double g = 9.81;

  void validate() const {
    require(m1 > 0 && m2 > 0 && l1 > 0 && l2 > 0 && J_link > 0 && tau_max > 0 && g > 0,
            "arm parameters must be positive");
    detail::substeps_per_control(dt_sim, dt_ctrl);
  }
};

class ArmPlant {
 public:
  explicit ArmPlant(ArmParams p = {}) : p_(p) { p_.validate(); }

  const ArmParams& params() const { return p_; }
  std::size_t dof() const { return 2; }
  double dt_sim() const { return p_.dt_sim; }
  double dt_ctrl() const { return p_.dt_ctrl; }
  Eigen::VectorXd torque_limits() const { return Eigen::Vector2d::Constant(p_.tau_max); }

  DynamicsTriple dynamics(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const {
    require(q.size() == 2 && qd.size() == 2, "arm state must be 2-dimensional");
    const double lc1 = 0.5 * p_.l1, lc2 = 0.5 * p_.l2;
    const double cb = std::cos(q[1]), sb = std::sin(q[1]);
    const double d22 = p_.m2 * lc2 * lc2 + p_.J_link;
    const double d12 = d22 + p_.m2 * p_.l1 * lc2 * cb;
    const double d11 = p_.m1 * lc1 * lc1 + p_.J_link + p_.m2 * (p_.l1 * p_.l1 + 2.0 * p_.l1 * lc2 * cb) + d22;
    const double h = -p_.m2 * p_.l1 * lc2 * sb;
    DynamicsTriple t;
    t.D.resize(2, 2);
    t.D << d11, d12, d12, d22;
    t.C.resize(2, 2);
    t.C << h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0;
    const double s1 = std::sin(q[0]), s12 = std::sin(q[0] + q[1]);
    t.G.resize(2);
    t.G << p_.g * (p_.m1 * lc1 * s1 + p_.m2 * (p_.l1 * s1 + lc2 * s12)), p_.g * p_.m2 * lc2 * s12;
    return t;
  }

  // Zero at the shoulder height, so the hanging rest position is negative.
  double potential(const Eigen::VectorXd& q) const {
    const double lc1 = 0.5 * p_.l1, lc2 = 0.5 * p_.l2;
    return -p_.g * (p_.m1 * lc1 * std::cos(q[0]) + p_.m2 * (p_.l1 * std::cos(q[0]) + lc2 * std::cos(q[0] + q[1])));
  }

  double kinetic(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const {
    return 0.5 * qd.dot(dynamics(q, qd).D * qd);
  }

  double energy(const Eigen::VectorXd& q, const Eigen::VectorXd& qd) const { return kinetic(q, qd) + potential(q); }

 private:
  ArmParams p_;
};

struct QuadParams {
  double m = 0.027;
  double l_arm = 0.046;
  double r_rotor = 0.022;
  Eigen::Vector3d J = Eigen::Vector3d(1.4e-5, 1.4e-5, 2.2e-5);
  double T_max = 0.16;
  double k_f = 3.16e-10;
  double k_m = 7.94e-12;
  double dt_sim = 1.0 / 240.0;
  double dt_ctrl = 1.0 / 48.0;
  double g = 9.81;

  void validate() const {
    require(m > 0 && l_arm > 0 && r_rotor > 0 && T_max > 0 && k_f > 0 && k_m > 0 && g > 0,
            "quadrotor parameters must be positive");
    require((J.array() > 0.0).all(), "quadrotor inertia must be diagonal positive");
    require(m * g < 4.0 * T_max, "quadrotor cannot hover with the given thrust limit");
    detail::substeps_per_control(dt_sim, dt_ctrl);
  }

  double hover_thrust_per_rotor() const { return m * g / 4.0; }
};

inline constexpr double kGimbalMargin = 0.1;

// Euler angles chi = (roll, pitch, yaw), Z-Y-X convention. Body rates are
// omega = W(chi) chi_dot, so the kinetic energy is 1/2 chi_dot^T W^T J W chi_dot.
// Hover thrust cancels gravity; the attitude has no potential.
class QuadPlant {
 public:
  explicit QuadPlant(QuadParams p = {}) : p_(p) { p_.validate(); }

  const QuadParams& params() const { return p_; }
  std::size_t dof() const { return 3; }
  double dt_sim() const { return p_.dt_sim; }
  double dt_ctrl() const { return p_.dt_ctrl; }

  // Largest symmetric torque per axis reachable around the hover point.
  Eigen::VectorXd torque_limits() const {
    const double th = p_.hover_thrust_per_rotor();
    const double delta = std::min(th, p_.T_max - th);
    const double arm = p_.l_arm / std::numbers::sqrt2;
    return Eigen::Vector3d(4.0 * arm * delta, 4.0 * arm * delta, 4.0 * (p_.k_m / p_.k_f) * delta);
  }

  static Eigen::Matrix3d rate_map(const Eigen::VectorXd& chi) {
    const double sp = std::sin(chi[0]), cp = std::cos(chi[0]);
    const double st = std::sin(chi[1]), ct = std::cos(chi[1]);
    Eigen::Matrix3d W;
    W << 1.0, 0.0, -st, 0.0, cp, sp * ct, 0.0, -sp, cp * ct;
    return W;
  }

  DynamicsTriple dynamics(const Eigen::VectorXd& chi, const Eigen::VectorXd& chid) const {
    require(chi.size() == 3 && chid.size() == 3, "attitude state must be 3-dimensional");
    if (!(std::abs(chi[1]) < std::numbers::pi / 2.0 - kGimbalMargin))
      throw GimbalProximity("pitch too close to +-pi/2 for Euler-angle dynamics");
    const double sp = std::sin(chi[0]), cp = std::cos(chi[0]);
    const double st = std::sin(chi[1]), ct = std::cos(chi[1]);
    const Eigen::Matrix3d W = rate_map(chi);
    Eigen::Matrix3d dW_roll, dW_pitch;
    dW_roll << 0.0, 0.0, 0.0, 0.0, -sp, cp * ct, 0.0, -cp, -sp * ct;
    dW_pitch << 0.0, 0.0, -ct, 0.0, 0.0, -sp * st, 0.0, 0.0, -cp * st;
    const Eigen::Matrix3d J = p_.J.asDiagonal();
    const Eigen::Matrix3d JW = J * W;
    std::array<Eigen::MatrixXd, 3> dD;
    dD[0] = dW_roll.transpose() * JW + JW.transpose() * dW_roll;
    dD[1] = dW_pitch.transpose() * JW + JW.transpose() * dW_pitch;
    dD[2] = Eigen::Matrix3d::Zero();
    DynamicsTriple t;
    t.D = W.transpose() * JW;
    t.D = 0.5 * (t.D + t.D.transpose());
    t.C = christoffel_coriolis(dD, chid);
    t.G = Eigen::Vector3d::Zero();
    return t;
  }

  double energy(const Eigen::VectorXd& chi, const Eigen::VectorXd& chid) const {
    return 0.5 * chid.dot(dynamics(chi, chid).D * chid);
  }

 private:
  QuadParams p_;
};

template <class P>
concept Plant = requires(const P& p, const Eigen::VectorXd& v) {
  { p.dof() } -> std::convertible_to<std::size_t>;
  { p.dt_sim() } -> std::convertible_to<double>;
  { p.dt_ctrl() } -> std::convertible_to<double>;
  { p.torque_limits() } -> std::convertible_to<Eigen::VectorXd>;
  { p.dynamics(v, v) } -> std::same_as<DynamicsTriple>;
};

inline Eigen::VectorXd saturate(const Eigen::VectorXd& u, const Eigen::VectorXd& limits, bool* clipped = nullptr) {
  Eigen::VectorXd out = u.cwiseMax(-limits).cwiseMin(limits);
  if (clipped) *clipped = (out.array() != u.array()).any();
  return out;
}

template <Plant P>
Eigen::VectorXd plant_accel(const P& plant, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                            const Eigen::VectorXd& u) {
  return forward_accel(plant.dynamics(q, qd), qd, u);
}

// Advances one control period with u held constant (after clamping) using
// classical RK4 at dt_sim. The dt_ctrl argument overrides the plant's.
template <Plant P>
PlantState step(const P& plant, const PlantState& state, const Eigen::VectorXd& u, double dt_ctrl,
                long step_index = 0) {
  require(static_cast<std::size_t>(u.size()) == plant.dof() && static_cast<std::size_t>(state.q.size()) == plant.dof() &&
              state.qd.size() == state.q.size(),
          "step: dimension mismatch");
  const long n = detail::substeps_per_control(plant.dt_sim(), dt_ctrl);
  const double h = dt_ctrl / static_cast<double>(n);
  const Eigen::VectorXd u_applied = saturate(u, plant.torque_limits());
  Eigen::VectorXd q = state.q, v = state.qd;
  try {
    for (long i = 0; i < n; ++i) {
      const Eigen::VectorXd a1 = plant_accel(plant, q, v, u_applied);
      const Eigen::VectorXd q2 = q + 0.5 * h * v, v2 = v + 0.5 * h * a1;
      const Eigen::VectorXd a2 = plant_accel(plant, q2, v2, u_applied);
      const Eigen::VectorXd q3 = q + 0.5 * h * v2, v3 = v + 0.5 * h * a2;
      const Eigen::VectorXd a3 = plant_accel(plant, q3, v3, u_applied);
      const Eigen::VectorXd q4 = q + h * v3, v4 = v + h * a3;
      const Eigen::VectorXd a4 = plant_accel(plant, q4, v4, u_applied);
      q += (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4);
      v += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      if (!q.allFinite() || !v.allFinite()) throw SimulationBlowUp("non-finite plant state", step_index);
    }
  } catch (const SingularInertia&) {
    throw SimulationBlowUp("inertia solve failed", step_index);
  } catch (const GimbalProximity&) {
    throw SimulationBlowUp("attitude left the Euler-angle domain", step_index);
  }
  return {q, v, state.t + dt_ctrl};
}

template <Plant P>
PlantState step(const P& plant, const PlantState& state, const Eigen::VectorXd& u) {
  return step(plant, state, u, plant.dt_ctrl());
}

struct RotorCommand {
  Eigen::Vector4d speeds;  // rad/s
  Eigen::Vector4d thrusts;  // N
  bool saturated = false;
};

// X-configuration rotors at (+d,+d), (-d,+d), (-d,-d), (+d,-d) with
// d = l_arm / sqrt(2); rotors 1 and 3 spin so their drag torque is +z.
inline Eigen::Matrix4d mixer_matrix(const QuadParams& p) {
  const double d = p.l_arm / std::numbers::sqrt2;
  const double c = p.k_m / p.k_f;
  Eigen::Matrix4d M;
  M << 1.0, 1.0, 1.0, 1.0,  //
      d, d, -d, -d,         //
      -d, d, d, -d,         //
      -c, c, -c, c;
  return M;
}

inline RotorCommand rotor_mix(const QuadParams& p, double total_thrust, const Eigen::Vector3d& body_torque) {
  Eigen::Vector4d wrench(total_thrust, body_torque[0], body_torque[1], body_torque[2]);
  Eigen::Vector4d thrusts = mixer_matrix(p).partialPivLu().solve(wrench);
  RotorCommand cmd;
  for (int i = 0; i < 4; ++i) {
    const double clamped = std::clamp(thrusts[i], 0.0, p.T_max);
    if (clamped != thrusts[i]) cmd.saturated = true;
    thrusts[i] = clamped;
  }
  cmd.thrusts = thrusts;
  cmd.speeds = (thrusts / p.k_f).cwiseSqrt();
  return cmd;
}

// Thrust and body torques produced by the given rotor speeds.
inline Eigen::Vector4d rotor_wrench(const QuadParams& p, const Eigen::Vector4d& speeds) {
  return mixer_matrix(p) * (p.k_f * speeds.cwiseAbs2());
}

}  // namespace llearn

#endif  // LLEARN_PLANTS_HPP_
