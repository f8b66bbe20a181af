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

#ifndef LLEARN_DYNAMICS_HPP_
#define LLEARN_DYNAMICS_HPP_

#include <Eigen/Dense>

#include <span>

#include "llearn/errors.hpp"

namespace llearn {

// D(q) qdd + C(q, qd) qd + G(q) = u, evaluated at one state.
struct DynamicsTriple {
  Eigen::MatrixXd D;
  Eigen::MatrixXd C;
  Eigen::VectorXd G;

  Eigen::Index dof() const { return G.size(); }
};

// C_ij = sum_k 1/2 (dD_ij/dq_k + dD_ik/dq_j - dD_jk/dq_i) qd_k
inline Eigen::MatrixXd christoffel_coriolis(std::span<const Eigen::MatrixXd> dD, const Eigen::VectorXd& qd) {
  const Eigen::Index n = qd.size();
  require(static_cast<Eigen::Index>(dD.size()) == n, "christoffel_coriolis: need one dD/dq_k per coordinate");
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < n; ++k)
        acc += 0.5 * (dD[k](i, j) + dD[j](i, k) - dD[i](j, k)) * qd[k];
      C(i, j) = acc;
    }
  return C;
}

// qdd = D^-1 (u - C qd - G) by Cholesky; no explicit inverse.
inline Eigen::VectorXd forward_accel(const DynamicsTriple& triple, const Eigen::VectorXd& qd,
                                     const Eigen::VectorXd& u) {
  const Eigen::Index n = triple.dof();
  require(qd.size() == n && u.size() == n && triple.D.rows() == n && triple.D.cols() == n,
          "forward_accel: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(triple.D);
  if (llt.info() != Eigen::Success) throw SingularInertia("inertia matrix is not positive definite");
  Eigen::VectorXd qdd = llt.solve(u - triple.C * qd - triple.G);
  if (!qdd.allFinite()) throw SingularInertia("inertia solve produced non-finite accelerations");
  return qdd;
}

inline Eigen::VectorXd apply_dynamics(const DynamicsTriple& triple, const Eigen::VectorXd& qd,
                                      const Eigen::VectorXd& qdd) {
  return triple.D * qdd + triple.C * qd + triple.G;
}

}  // namespace llearn

#endif  // LLEARN_DYNAMICS_HPP_
