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

// Learned Lagrangian: L = 1/2 qd^T D(q) qd - P(q), where D = s (R R^T + eps I)
// with R lower triangular with positive diagonal produced by one network and
// P = s p(q) produced by a second network. s is a fixed torque scale (1 for
// plants whose torques are O(1) N m).
//
// The dynamics follow from first input-derivatives of the two networks:
//   D        from R,
//   C_ij   = sum_k 1/2 (dD_ij/dq_k + dD_ik/dq_j - dD_jk/dq_i) qd_k,
//   G      = dP/dq,
//   u_hat  = D qdd + C qd + G.

#ifndef LLEARN_DELAN_HPP_
#define LLEARN_DELAN_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "llearn/diffcore.hpp"
#include "llearn/dynamics.hpp"
#include "llearn/errors.hpp"

namespace llearn {

struct Transition {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
  Eigen::VectorXd qdd;
  Eigen::VectorXd u;

  bool finite() const { return q.allFinite() && qd.allFinite() && qdd.allFinite() && u.allFinite(); }
};

inline constexpr double kDiagonalFloor = 1e-6;

inline std::size_t tril_size(std::size_t n) { return n * (n + 1) / 2; }

// Output layout of the inertia network: the n diagonal entries first, then
// the strictly-lower entries row by row.
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> tril_entries(std::size_t n) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> e;
  for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, i);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) e.emplace_back(i, j);
  return e;
}

struct LearnedModel {
  std::size_t dof = 0;
  NetworkSpec inertia_spec;
  ParameterVector inertia_params;
  NetworkSpec potential_spec;
  ParameterVector potential_params;
  double epsilon_pd = 1e-3;
  double torque_scale = 1.0;
  std::uint64_t seed = 0;

  static LearnedModel create(std::size_t dof, const std::vector<std::size_t>& hidden, std::uint64_t seed,
                             double epsilon_pd = 1e-3, double torque_scale = 1.0) {
    require(dof >= 1, "model dof must be >= 1");
    LearnedModel m;
    m.dof = dof;
    m.inertia_spec = {dof, tril_size(dof), hidden, Activation::kSoftplus};
    m.potential_spec = {dof, 1, hidden, Activation::kSoftplus};
    m.inertia_params = ParameterVector::glorot(m.inertia_spec, seed);
    m.potential_params = ParameterVector::glorot(m.potential_spec, seed ^ 0x9e3779b97f4a7c15ULL);
    m.epsilon_pd = epsilon_pd;
    m.torque_scale = torque_scale;
    m.seed = seed;
    m.validate();
    return m;
  }

  void validate() const {
    require(inertia_spec.input_dim == dof && potential_spec.input_dim == dof, "network input must equal dof");
    require(inertia_spec.output_dim == tril_size(dof), "inertia network must output n(n+1)/2 entries");
    require(potential_spec.output_dim == 1, "potential network must output a scalar");
    require(epsilon_pd > 0.0, "epsilon_pd must be positive");
    require(torque_scale > 0.0, "torque_scale must be positive");
    check_params(inertia_spec, inertia_params);
    check_params(potential_spec, potential_params);
  }

  std::size_t parameter_count() const { return inertia_params.size() + potential_params.size(); }

  Eigen::VectorXd packed() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count()));
    p << inertia_params.values, potential_params.values;
    return p;
  }

  void unpack(const Eigen::VectorXd& p) {
    require(static_cast<std::size_t>(p.size()) == parameter_count(), "unpack: length mismatch");
    const auto ni = static_cast<Eigen::Index>(inertia_params.size());
    inertia_params.values = p.head(ni);
    potential_params.values = p.tail(p.size() - ni);
  }
};

namespace detail {

struct FactorJet {
  Eigen::MatrixXd L;
  std::vector<Eigen::MatrixXd> dL;  // dL/dq_k
};

// raw: network output column; raw_jac(e, k) = d raw_e / d q_k.
inline FactorJet assemble_factor(std::size_t n, const Eigen::VectorXd& raw, const Eigen::MatrixXd& raw_jac) {
  const auto entries = tril_entries(n);
  const auto N = static_cast<Eigen::Index>(n);
  FactorJet f;
  f.L = Eigen::MatrixXd::Zero(N, N);
  f.dL.assign(n, Eigen::MatrixXd::Zero(N, N));
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto [i, j] = entries[e];
    const auto E = static_cast<Eigen::Index>(e);
    if (i == j) {
      f.L(i, i) = activation::softplus(raw[E]) + kDiagonalFloor;
      const double slope = activation::sigmoid(raw[E]);
      for (Eigen::Index k = 0; k < N; ++k) f.dL[k](i, i) = slope * raw_jac(E, k);
    } else {
      f.L(i, j) = raw[E];
      for (Eigen::Index k = 0; k < N; ++k) f.dL[k](i, j) = raw_jac(E, k);
    }
  }
  return f;
}

// s (A B^T + B A^T + [eps I]) assembled entry by entry so the result is exactly symmetric.
inline Eigen::MatrixXd symmetric_product(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double scale,
                                         double diag_shift) {
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v = A.row(i).dot(B.row(j)) + B.row(i).dot(A.row(j));
      if (i == j) v += diag_shift;
      out(i, j) = out(j, i) = scale * v;
    }
  return out;
}

inline Eigen::VectorXd column(const Jet& j, Eigen::Index b) { return j.value.col(b); }

inline Eigen::MatrixXd jacobian_at(const Jet& j, Eigen::Index b) {
  Eigen::MatrixXd jac(j.value.rows(), static_cast<Eigen::Index>(j.tangent.size()));
  for (std::size_t k = 0; k < j.tangent.size(); ++k) jac.col(static_cast<Eigen::Index>(k)) = j.tangent[k].col(b);
  return jac;
}

struct ModelJets {
  FactorJet factor;
  Eigen::VectorXd potential_grad;  // unscaled dp/dq
  double potential = 0.0;          // unscaled p(q)
};

inline ModelJets evaluate_jets(const LearnedModel& m, const Eigen::VectorXd& q) {
  require(static_cast<std::size_t>(q.size()) == m.dof, "state dimension does not match model dof");
  const Jet ij = net_jet(m.inertia_spec, m.inertia_params, q);
  const Jet pj = net_jet(m.potential_spec, m.potential_params, q);
  ModelJets out;
  out.factor = assemble_factor(m.dof, column(ij, 0), jacobian_at(ij, 0));
  out.potential = pj.value(0, 0);
  out.potential_grad = jacobian_at(pj, 0).row(0).transpose();
  return out;
}

inline Eigen::MatrixXd inertia_from(const LearnedModel& m, const FactorJet& f) {
  return symmetric_product(f.L, f.L, 0.5 * m.torque_scale, 2.0 * m.epsilon_pd);
}

inline std::vector<Eigen::MatrixXd> inertia_partials(const LearnedModel& m, const FactorJet& f) {
  std::vector<Eigen::MatrixXd> dD;
  for (const auto& dLk : f.dL) dD.push_back(symmetric_product(dLk, f.L, m.torque_scale, 0.0));
  return dD;
}

}  // namespace detail

/// Learned inertia matrix; symmetric with min eigenvalue >= torque_scale * epsilon_pd.
inline Eigen::MatrixXd inertia_estimate(const LearnedModel& model, const Eigen::VectorXd& q) {
  require(static_cast<std::size_t>(q.size()) == model.dof, "state dimension does not match model dof");
  const Jet ij = net_jet(model.inertia_spec, model.inertia_params, q);
  const auto f = detail::assemble_factor(model.dof, detail::column(ij, 0), detail::jacobian_at(ij, 0));
  return detail::inertia_from(model, f);
}

inline double potential_estimate(const LearnedModel& model, const Eigen::VectorXd& q) {
  return model.torque_scale * net_forward(model.potential_spec, model.potential_params, q)[0];
}

inline double lagrangian(const LearnedModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  require(qd.size() == q.size(), "velocity dimension mismatch");
  return 0.5 * qd.dot(inertia_estimate(model, q) * qd) - potential_estimate(model, q);
}

inline Eigen::MatrixXd coriolis_estimate(const LearnedModel& model, const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& qd) {
  require(qd.size() == q.size(), "velocity dimension mismatch");
  const auto jets = detail::evaluate_jets(model, q);
  const auto dD = detail::inertia_partials(model, jets.factor);
  return christoffel_coriolis(dD, qd);
}

inline Eigen::VectorXd gravity_estimate(const LearnedModel& model, const Eigen::VectorXd& q) {
  require(static_cast<std::size_t>(q.size()) == model.dof, "state dimension does not match model dof");
  return model.torque_scale * net_input_jacobian(model.potential_spec, model.potential_params, q).row(0).transpose();
}

/// D, C and G at one state from a single pass through each network.
inline DynamicsTriple estimate_triple(const LearnedModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  require(qd.size() == q.size(), "velocity dimension mismatch");
  const auto jets = detail::evaluate_jets(model, q);
  DynamicsTriple t;
  t.D = detail::inertia_from(model, jets.factor);
  t.C = christoffel_coriolis(detail::inertia_partials(model, jets.factor), qd);
  t.G = model.torque_scale * jets.potential_grad;
  return t;
}

/// dD/dq_k contracted with qd, i.e. the time derivative of D along the motion.
inline Eigen::MatrixXd inertia_rate_estimate(const LearnedModel& model, const Eigen::VectorXd& q,
                                             const Eigen::VectorXd& qd) {
  const auto jets = detail::evaluate_jets(model, q);
  const auto dD = detail::inertia_partials(model, jets.factor);
  Eigen::MatrixXd Ddot = Eigen::MatrixXd::Zero(q.size(), q.size());
  for (Eigen::Index k = 0; k < q.size(); ++k) Ddot += qd[k] * dD[k];
  return Ddot;
}

inline Eigen::VectorXd inverse_dynamics(const LearnedModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                                        const Eigen::VectorXd& qdd) {
  require(qdd.size() == q.size(), "acceleration dimension mismatch");
  return apply_dynamics(estimate_triple(model, q, qd), qd, qdd);
}

namespace detail {

// u_hat for one sample written in terms of the factor jet, plus the adjoint
// pass that maps d(loss)/d(u_hat) back onto the raw network jets.
inline Eigen::VectorXd inverse_dynamics_from_factor(const LearnedModel& m, const FactorJet& f,
                                                    const Eigen::VectorXd& potential_grad, const Eigen::VectorXd& v,
                                                    const Eigen::VectorXd& a) {
  const Eigen::Index n = v.size();
  Eigen::MatrixXd Ldot = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) Ldot += v[k] * f.dL[k];
  const Eigen::VectorXd alpha = f.L.transpose() * a;
  const Eigen::VectorXd b = f.L.transpose() * v;
  const Eigen::VectorXd c = Ldot.transpose() * v;
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = (f.dL[i].transpose() * v).dot(b);
  return m.torque_scale * (f.L * (alpha + c) + m.epsilon_pd * a + Ldot * b - g + potential_grad);
}

inline void backprop_residual(const LearnedModel& m, const FactorJet& f, const Eigen::VectorXd& raw,
                              const Eigen::MatrixXd& raw_jac, const Eigen::VectorXd& v, const Eigen::VectorXd& a,
                              const Eigen::VectorXd& u_hat_adjoint, Eigen::Index b_index, Jet& inertia_adj,
                              Jet& potential_adj) {
  const Eigen::Index n = v.size();
  const Eigen::VectorXd rho = m.torque_scale * u_hat_adjoint;
  Eigen::MatrixXd Ldot = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) Ldot += v[k] * f.dL[k];
  const Eigen::VectorXd alpha = f.L.transpose() * a;
  const Eigen::VectorXd b = f.L.transpose() * v;
  const Eigen::VectorXd c = Ldot.transpose() * v;
  const Eigen::VectorXd Lt_rho = f.L.transpose() * rho;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) y += rho[i] * (f.dL[i].transpose() * v);

  const Eigen::MatrixXd L_bar = rho * alpha.transpose() + a * Lt_rho.transpose() +
                                v * (Ldot.transpose() * rho).transpose() + rho * c.transpose() - v * y.transpose();
  const Eigen::MatrixXd Ldot_bar = rho * b.transpose() + v * Lt_rho.transpose();
  std::vector<Eigen::MatrixXd> dL_bar;
  for (Eigen::Index k = 0; k < n; ++k) dL_bar.push_back(v[k] * Ldot_bar - rho[k] * (v * b.transpose()));

  const auto entries = tril_entries(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto [i, j] = entries[e];
    const auto E = static_cast<Eigen::Index>(e);
    if (i == j) {
      const double sig = activation::sigmoid(raw[E]);
      const double curv = sig * (1.0 - sig);
      double acc = L_bar(i, i) * sig;
      for (Eigen::Index k = 0; k < n; ++k) {
        acc += dL_bar[k](i, i) * curv * raw_jac(E, k);
        inertia_adj.tangent[k](E, b_index) += dL_bar[k](i, i) * sig;
      }
      inertia_adj.value(E, b_index) += acc;
    } else {
      inertia_adj.value(E, b_index) += L_bar(i, j);
      for (Eigen::Index k = 0; k < n; ++k) inertia_adj.tangent[k](E, b_index) += dL_bar[k](i, j);
    }
  }
  for (Eigen::Index k = 0; k < n; ++k) potential_adj.tangent[k](0, b_index) += rho[k];
}

inline Eigen::MatrixXd batch_inputs(std::span<const Transition> batch, std::size_t dof) {
  Eigen::MatrixXd Q(static_cast<Eigen::Index>(dof), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require(static_cast<std::size_t>(batch[b].q.size()) == dof && batch[b].qd.size() == batch[b].q.size() &&
                batch[b].qdd.size() == batch[b].q.size() && batch[b].u.size() == batch[b].q.size(),
            "transition dimension does not match model dof");
    Q.col(static_cast<Eigen::Index>(b)) = batch[b].q;
  }
  return Q;
}

inline constexpr double kZeroResidual = 1e-12;

}  // namespace detail

/// Mean Euclidean norm of u_hat - u over the batch.
inline double batch_loss(const LearnedModel& model, std::span<const Transition> batch) {
  require(!batch.empty(), "batch_loss: empty batch");
  const Eigen::MatrixXd Q = detail::batch_inputs(batch, model.dof);
  const Jet ij = net_jet(model.inertia_spec, model.inertia_params, Q);
  const Jet pj = net_jet(model.potential_spec, model.potential_params, Q);
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto b = static_cast<Eigen::Index>(s);
    const auto f = detail::assemble_factor(model.dof, detail::column(ij, b), detail::jacobian_at(ij, b));
    const Eigen::VectorXd gp = detail::jacobian_at(pj, b).row(0).transpose();
    total += (detail::inverse_dynamics_from_factor(model, f, gp, batch[s].qd, batch[s].qdd) - batch[s].u).norm();
  }
  return total / static_cast<double>(batch.size());
}

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // packed (inertia, potential) order
};

inline LossAndGradient batch_loss_gradient(const LearnedModel& model, std::span<const Transition> batch,
                                           long batch_index = -1) {
  require(!batch.empty(), "batch_loss: empty batch");
  const Eigen::MatrixXd Q = detail::batch_inputs(batch, model.dof);
  const NetBinding nets[] = {{&model.inertia_spec, &model.inertia_params},
                             {&model.potential_spec, &model.potential_params}};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  auto loss = [&](std::span<const Jet> out, std::span<Jet> adj) {
    double total = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const auto b = static_cast<Eigen::Index>(s);
      const Eigen::VectorXd raw = detail::column(out[0], b);
      const Eigen::MatrixXd raw_jac = detail::jacobian_at(out[0], b);
      const auto f = detail::assemble_factor(model.dof, raw, raw_jac);
      const Eigen::VectorXd gp = detail::jacobian_at(out[1], b).row(0).transpose();
      const Eigen::VectorXd r =
          detail::inverse_dynamics_from_factor(model, f, gp, batch[s].qd, batch[s].qdd) - batch[s].u;
      const double norm = r.norm();
      total += norm;
      if (norm < detail::kZeroResidual) continue;
      detail::backprop_residual(model, f, raw, raw_jac, batch[s].qd, batch[s].qdd, r * (inv_n / norm), b, adj[0],
                                adj[1]);
    }
    return total * inv_n;
  };
  LossAndGradient out;
  out.loss = loss_param_gradient(std::span<const NetBinding>(nets), Q, loss, out.gradient, batch_index);
  return out;
}

struct TrainStepResult {
  LearnedModel model;
  OptimizerState state;
  double loss = 0.0;  // before the update
};

/// One joint Adam step on both networks.
inline TrainStepResult train_step(LearnedModel model, std::span<const Transition> batch, OptimizerState state,
                                  long batch_index = -1) {
  if (state.first_moment.size() == 0) {
    const double lr = state.learning_rate;
    state = OptimizerState::for_size(model.parameter_count(), lr);
  }
  auto lg = batch_loss_gradient(model, batch, batch_index);
  auto stepped = adam_step(std::move(state), model.packed(), lg.gradient);
  if (!stepped.params.allFinite()) throw TrainingDivergence("non-finite parameters after update", batch_index);
  model.unpack(stepped.params);
  return {std::move(model), std::move(stepped.state), lg.loss};
}

// Model checkpoint: "llearn-model 1", dof, epsilon_pd, torque_scale, then
// the inertia and potential networks in the network checkpoint format.
inline void write_model(std::ostream& os, const LearnedModel& m) {
  os << "llearn-model 1\n";
  os << "dof " << m.dof << "\n";
  os << "epsilon_pd ";
  detail::write_double(os, m.epsilon_pd);
  os << "\ntorque_scale ";
  detail::write_double(os, m.torque_scale);
  os << "\nseed " << m.seed << "\n";
  write_network(os, {m.inertia_spec, m.inertia_params, m.seed});
  write_network(os, {m.potential_spec, m.potential_params, m.seed});
}

inline LearnedModel read_model(std::istream& is) {
  LearnedModel m;
  detail::expect_token(is, "llearn-model");
  int version = 0;
  is >> version;
  if (version != 1) throw InvalidInput("checkpoint: unsupported model version");
  detail::expect_token(is, "dof");
  is >> m.dof;
  detail::expect_token(is, "epsilon_pd");
  m.epsilon_pd = detail::read_double(is);
  detail::expect_token(is, "torque_scale");
  m.torque_scale = detail::read_double(is);
  detail::expect_token(is, "seed");
  is >> m.seed;
  auto inertia = read_network(is);
  auto potential = read_network(is);
  m.inertia_spec = inertia.spec;
  m.inertia_params = std::move(inertia.params);
  m.potential_spec = potential.spec;
  m.potential_params = std::move(potential.params);
  m.validate();
  return m;
}

}  // namespace llearn

#endif  // LLEARN_DELAN_HPP_
