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
#include <memory>
#include <optional>
#include <string>

#include "llearn/dynamics.hpp"
#include "llearn/errors.hpp"
#include "llearn/plants.hpp"
#include "llearn/trajectories.hpp"

namespace llearn {

namespace detail {

inline bool is_spd(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols() || M.size() == 0 || !M.allFinite()) return false;
  if ((M - M.transpose()).norm() > 1e-12 * M.norm()) return false;
  return Eigen::LLT<Eigen::MatrixXd>(M).info() == Eigen::Success;
}

}  // namespace detail

struct ControllerGains {
  Eigen::MatrixXd Lambda;  // 1/s
  Eigen::MatrixXd A;
  Eigen::MatrixXd H;
  double alpha0 = 1.0;       // 1/s
  double alpha_decay = 10.0;  // s

  static ControllerGains diagonal(std::size_t n, double lambda, double a, double h, double alpha0 = 1.0,
                                  double alpha_decay = 10.0) {
    const auto N = static_cast<Eigen::Index>(n);
    return {lambda * Eigen::MatrixXd::Identity(N, N), a * Eigen::MatrixXd::Identity(N, N),
            h * Eigen::MatrixXd::Identity(N, N), alpha0, alpha_decay};
  }

  std::size_t dof() const { return static_cast<std::size_t>(Lambda.rows()); }

  /// Throws InvalidInput; dt_ctrl bounds the explicit leakage step.
  void validate(double dt_ctrl) const {
    require(detail::is_spd(Lambda), "gains: Lambda must be symmetric positive definite");
    require(detail::is_spd(A), "gains: A must be symmetric positive definite");
    require(detail::is_spd(H), "gains: H must be symmetric positive definite");
    require(A.rows() == Lambda.rows() && H.rows() == Lambda.rows(), "gains: matrix sizes differ");
    require(alpha0 >= 0.0 && std::isfinite(alpha0), "gains: alpha0 must be finite and >= 0");
    require(alpha_decay > 0.0, "gains: alpha_decay must be positive");
    require(alpha0 * dt_ctrl < 1.0, "gains: alpha0 * dt_ctrl >= 1 makes the leakage step unstable");
  }
};

/// Arm defaults. Lambda = 20 keeps the hold-induced lag of a 48 Hz loop
/// below 1e-3 rad; H = 2 keeps the fast inertial mode well damped under
/// exploration noise instead of chattering at the stability margin.
inline ControllerGains default_arm_gains() { return ControllerGains::diagonal(2, 20.0, 10.0, 2.0); }

/// Attitude defaults, expressed relative to the body inertia so the same
/// closed-loop time constants hold for any airframe size.
inline ControllerGains default_quad_gains(const Eigen::Vector3d& J) {
  ControllerGains g = ControllerGains::diagonal(3, 10.0, 1.0, 1.0);
  g.H = 20.0 * J.asDiagonal().toDenseMatrix();
  g.A = (0.5 * J.cwiseInverse()).asDiagonal().toDenseMatrix();
  return g;
}

inline double leakage(const ControllerGains& g, double t) { return g.alpha0 * std::exp(-t / g.alpha_decay); }

struct CompensatorState {
  Eigen::VectorXd dhat;
  double t = 0.0;

  static CompensatorState zeros(std::size_t n) { return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), 0.0}; }
};

struct SlidingState {
  Eigen::VectorXd q_err;  // q_d - q
  Eigen::VectorXd qd_r;
  Eigen::VectorXd qdd_r;
  Eigen::VectorXd s;
};

inline SlidingState sliding_vars(const ControllerGains& g, const PlantState& x, const ReferenceSample& ref) {
  require(x.q.size() == ref.q.size() && x.qd.size() == ref.qd.size() && g.Lambda.rows() == x.q.size(),
          "sliding_vars: dimension mismatch");
  SlidingState st;
  st.q_err = ref.q - x.q;
  st.qd_r = ref.qd + g.Lambda * st.q_err;
  st.qdd_r = ref.qdd + g.Lambda * (ref.qd - x.qd);
  st.s = st.qd_r - x.qd;
  return st;
}

/// One explicit Euler step of the leaky integral compensator.
inline CompensatorState compensator_update(const CompensatorState& c, const ControllerGains& g,
                                           const Eigen::VectorXd& s, double dt_ctrl) {
  require(dt_ctrl > 0.0, "compensator_update: dt_ctrl must be positive");
  require(s.size() == c.dhat.size(), "compensator_update: dimension mismatch");
  const double a = leakage(g, c.t);
  if (a * dt_ctrl >= 1.0) throw InvalidInput("compensator_update: unstable leakage step");
  return {(1.0 - a * dt_ctrl) * c.dhat + dt_ctrl * g.A.llt().solve(s), c.t + dt_ctrl};
}

/// u = D q''_r + C q'_r + G + dhat + H s, before saturation.
inline Eigen::VectorXd control_law(const DynamicsTriple& est, const ControllerGains& g, const SlidingState& sl,
                                   const Eigen::VectorXd& dhat) {
  return est.D * sl.qdd_r + est.C * sl.qd_r + est.G + dhat + g.H * sl.s;
}

/// Lumped modelling error d for a given acceleration.
inline Eigen::VectorXd model_error(const DynamicsTriple& truth, const DynamicsTriple& est, const Eigen::VectorXd& qdd,
                                   const Eigen::VectorXd& qd) {
  return (truth.D - est.D) * qdd + (truth.C - est.C) * qd + (truth.G - est.G);
}

struct LyapunovRecord {
  double V = 0.0;
  double Vdot_measured = std::numeric_limits<double>::quiet_NaN();
  double Vdot_predicted = 0.0;
};

inline LyapunovRecord lyapunov_eval(const Eigen::MatrixXd& Dhat, const Eigen::MatrixXd& A, const Eigen::MatrixXd& H,
                                    const Eigen::VectorXd& s, const Eigen::VectorXd& z, double alpha) {
  LyapunovRecord r;
  r.V = 0.5 * s.dot(Dhat * s) + 0.5 * z.dot(A * z);
  r.Vdot_predicted = -s.dot(H * s) - alpha * z.dot(A * z);
  return r;
}

struct PidGains {
  Eigen::VectorXd Kp, Ki, Kd;
  Eigen::VectorXd integral_clamp;

  /// Anti-windup bound 10 * tau_max / Ki per channel (unbounded when Ki = 0).
  static PidGains with_default_clamp(Eigen::VectorXd kp, Eigen::VectorXd ki, Eigen::VectorXd kd,
                                     const Eigen::VectorXd& tau_max) {
    PidGains g{std::move(kp), std::move(ki), std::move(kd), {}};
    g.integral_clamp.resize(g.Ki.size());
    for (Eigen::Index i = 0; i < g.Ki.size(); ++i)
      g.integral_clamp[i] = g.Ki[i] > 0.0 ? 10.0 * tau_max[i] / g.Ki[i] : std::numeric_limits<double>::infinity();
    return g;
  }

  void validate() const {
    const auto n = Kp.size();
    require(n > 0 && Ki.size() == n && Kd.size() == n && integral_clamp.size() == n, "pid: gain length mismatch");
    require((Kp.array() >= 0).all() && (Ki.array() >= 0).all() && (Kd.array() >= 0).all() &&
                (integral_clamp.array() >= 0).all(),
            "pid: gains must be nonnegative");
    require(Kp.allFinite() && Ki.allFinite() && Kd.allFinite(), "pid: gains must be finite");
  }
};

struct PidOutput {
  Eigen::VectorXd u;
  Eigen::VectorXd integral;
};

inline PidOutput pid_control(const PidGains& g, const PlantState& x, const ReferenceSample& ref,
                             const Eigen::VectorXd& integral, double dt_ctrl) {
  require(x.q.size() == g.Kp.size() && ref.q.size() == g.Kp.size() && integral.size() == g.Kp.size(),
          "pid_control: dimension mismatch");
  const Eigen::VectorXd e = ref.q - x.q;
  const Eigen::VectorXd I = (integral + dt_ctrl * e).cwiseMax(-g.integral_clamp).cwiseMin(g.integral_clamp);
  return {g.Kp.cwiseProduct(e) + g.Ki.cwiseProduct(I) + g.Kd.cwiseProduct(ref.qd - x.qd), I};
}

/// What a controller reports for one control step.
struct ControlOutput {
  Eigen::VectorXd u;  // before saturation
  std::optional<SlidingState> sliding;
  std::optional<DynamicsTriple> estimate;
  Eigen::VectorXd dhat;  // compensation used in u (zero for PID)
  double alpha = 0.0;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset() = 0;
  virtual ControlOutput compute(const PlantState& x, const ReferenceSample& ref) = 0;
  virtual const ControllerGains* lyapunov_gains() const { return nullptr; }
};

using TripleEstimator = std::function<DynamicsTriple(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Sliding-variable tracking controller with integral compensation.
class LyapunovController final : public Controller {
 public:
  LyapunovController(TripleEstimator estimator, ControllerGains gains, double dt_ctrl, bool freeze_compensator = false)
      : estimator_(std::move(estimator)), gains_(std::move(gains)), dt_(dt_ctrl), freeze_(freeze_compensator) {
    require(static_cast<bool>(estimator_), "controller: estimator must be set");
    gains_.validate(dt_);
    reset();
  }

  void reset() override { comp_ = CompensatorState::zeros(gains_.dof()); }

  ControlOutput compute(const PlantState& x, const ReferenceSample& ref) override {
    ControlOutput out;
    out.sliding = sliding_vars(gains_, x, ref);
    out.estimate = estimator_(x.q, x.qd);
    out.dhat = comp_.dhat;
    out.alpha = leakage(gains_, comp_.t);
    out.u = control_law(*out.estimate, gains_, *out.sliding, comp_.dhat);
    if (freeze_)
      comp_.t += dt_;
    else
      comp_ = compensator_update(comp_, gains_, out.sliding->s, dt_);
    return out;
  }

  const ControllerGains* lyapunov_gains() const override { return &gains_; }
  const CompensatorState& compensator() const { return comp_; }

 private:
  TripleEstimator estimator_;
  ControllerGains gains_;
  double dt_;
  bool freeze_;
  CompensatorState comp_;
};

class PidController final : public Controller {
 public:
  PidController(PidGains gains, double dt_ctrl) : gains_(std::move(gains)), dt_(dt_ctrl) {
    gains_.validate();
    reset();
  }

  void reset() override { integral_ = Eigen::VectorXd::Zero(gains_.Kp.size()); }

  ControlOutput compute(const PlantState& x, const ReferenceSample& ref) override {
    auto r = pid_control(gains_, x, ref, integral_, dt_);
    integral_ = std::move(r.integral);
    ControlOutput out;
    out.u = std::move(r.u);
    out.dhat = Eigen::VectorXd::Zero(gains_.Kp.size());
    return out;
  }

  const PidGains& gains() const { return gains_; }

 private:
  PidGains gains_;
  double dt_;
  Eigen::VectorXd integral_;
};

}  // namespace llearn
