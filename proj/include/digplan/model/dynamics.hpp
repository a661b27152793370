// Copyright 2026 The Digplan Authors
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

#include <array>

#include "digplan/common.hpp"
#include "digplan/model/kinematics.hpp"
#include "digplan/model/params.hpp"

namespace digplan {

/// Mass matrix, Coriolis matrix and gravity vector in one coordinate frame.
/// C is built from Christoffel symbols, so dM/dt = C + C^T.
struct DynamicsTerms {
  Mat4 M = Mat4::Identity();
  Mat4 C = Mat4::Zero();
  Vec4 G = Vec4::Zero();

  Vec4 h(const Vec4& qd) const { return C * qd + G; }
};

/// Mass matrix and bias force of the cylinder-coordinate dynamics.
struct CylinderDynamics {
  Mat4 M = Mat4::Identity();
  Vec4 h = Vec4::Zero();
  LinkageJacobians jac;
};

/// Rigid-body dynamics of the swing + three-link planar arm.
///
/// The swing axis is vertical and the planar links rotate about parallel
/// lateral axes, so the mass matrix is block diagonal: a scalar yaw inertia
/// that depends on the arm posture and a 3x3 planar block. Link rotational
/// inertia about the vertical axis uses the slender-body approximation
/// I cos^2(phi).
class Dynamics {
 public:
  explicit Dynamics(ModelParams params) : kin_(std::move(params)) {}

  const Kinematics& kinematics() const { return kin_; }
  const ModelParams& params() const { return kin_.params(); }

  DynamicsTerms Terms(const JointState& x) const {
    const Chain chain = EvaluateChain(x.q);
    DynamicsTerms out;
    out.M = chain.M;
    // Gamma_ijk = (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) / 2
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        double c = 0.0;
        for (int k = 0; k < 4; ++k) {
          c += 0.5 * (chain.dM[k](i, j) + chain.dM[j](i, k) - chain.dM[i](j, k)) *
               x.qd[k];
        }
        out.C(i, j) = c;
      }
    }
    out.G = chain.G;
    return out;
  }

  /// Time derivative of M along qd.
  Mat4 MassMatrixRate(const JointState& x) const {
    const Chain chain = EvaluateChain(x.q);
    Mat4 m_dot = Mat4::Zero();
    for (int k = 0; k < 4; ++k) m_dot += chain.dM[k] * x.qd[k];
    return m_dot;
  }

  Mat4 MassMatrix(const Vec4& q_theta) const {
    return EvaluateChain(q_theta).M;
  }

  /// Joint accelerations for joint-frame forces tau = J_theta^T u plus a
  /// lumped joint-frame disturbance.
  Vec4 JointAcceleration(const JointState& x, const Vec4& joint_force) const {
    const DynamicsTerms t = Terms(x);
    return t.M.llt().solve(joint_force - t.h(x.qd));
  }

  /// Joint-frame forces produced by cylinder-frame inputs.
  Vec4 JointForce(const Vec4& q_theta, const ControlInput& u) const {
    const Vec4 q_l = kin_.JointToCylinder(q_theta);
    return kin_.Jacobians(q_l, Vec4::Zero()).Jtheta.transpose() * u;
  }

  /// dx/dt in joint coordinates for input u and disturbance `delta`.
  Vec8 ForwardTheta(const JointState& x, const ControlInput& u,
                    const Vec4& delta) const {
    Vec8 dx;
    dx << x.qd, JointAcceleration(x, JointForce(x.q, u) + delta);
    return dx;
  }

  /// M_L = JL^T M JL and h_L = JL^T (M JL_dot qd_L + h(q, JL qd_L)).
  CylinderDynamics Cylinder(const CylinderState& x) const {
    CylinderDynamics out;
    out.jac = kin_.Jacobians(x.q, x.qd);
    const JointState xt{kin_.CylinderToJoint(x.q), out.jac.JL * x.qd};
    const DynamicsTerms t = Terms(xt);
    out.M = out.jac.JL.transpose() * t.M * out.jac.JL;
    out.h = out.jac.JL.transpose() *
            (t.M * out.jac.JL_dot * x.qd + t.h(xt.qd));
    return out;
  }

  /// dx_L/dt = [qd_L; M_L^-1 (-h_L + u + delta_L)].
  Vec8 ForwardCylinder(const CylinderState& x, const ControlInput& u,
                       const Vec4& delta_l) const {
    const CylinderDynamics d = Cylinder(x);
    Vec8 dx;
    dx << x.qd, d.M.llt().solve(-d.h + u + delta_l);
    return dx;
  }

  /// Cylinder forces that realize accelerations qdd_L (no disturbance).
  ControlInput InverseCylinder(const CylinderState& x, const Vec4& qdd_l) const {
    const CylinderDynamics d = Cylinder(x);
    return d.M * qdd_l + d.h;
  }

  double KineticEnergy(const JointState& x) const {
    return 0.5 * x.qd.dot(MassMatrix(x.q) * x.qd);
  }

  double PotentialEnergy(const Vec4& q_theta) const {
    const Chain chain = EvaluateChain(q_theta);
    return chain.potential;
  }

 private:
  struct Chain {
    Mat4 M = Mat4::Zero();
    std::array<Mat4, 4> dM{};  // dM/dq_k
    Vec4 G = Vec4::Zero();
    double potential = 0.0;
  };

  // R(phi) w = w.x * dir(phi) + w.y * normal(phi).
  static Vec2 Rotate(double phi, const Vec2& w) {
    const double c = std::cos(phi), s = std::sin(phi);
    return {w.x() * c - w.y() * s, -w.x() * s - w.y() * c};
  }
  // d/dphi R(phi) w = R(phi) (-w.y, w.x).
  static Vec2 Perp(const Vec2& w) { return {-w.y(), w.x()}; }

  Chain EvaluateChain(const Vec4& q_theta) const {
    const ModelParams& p = kin_.params();
    std::array<double, 3> phi{};
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
      acc += q_theta[i + 1];
      phi[i] = acc;
    }

    Chain out;
    Mat3 planar = Mat3::Zero();
    std::array<Mat3, 3> d_planar{};
    for (auto& m : d_planar) m.setZero();
    double yaw = p.cabin_yaw_inertia_kgm2;
    Vec3 d_yaw = Vec3::Zero();
    const double g = p.gravity_mps2;

    for (int j = 0; j < 3; ++j) {
      const LinkParams& link = p.links[j];
      // Link j's COM is pivot + sum_{i<=j} R(phi_i) w_i.
      std::array<Vec2, 3> w{};
      for (int i = 0; i < j; ++i) w[i] = Vec2(p.links[i].length_m, 0.0);
      w[j] = Vec2(link.com_along_m, link.com_normal_m);

      Vec2 com = p.boom_pivot_m;
      for (int i = 0; i <= j; ++i) com += Rotate(phi[i], w[i]);

      // jac(:, k) = sum_{k<=i<=j} R(phi_i) Perp(w_i)
      Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
      for (int k = 0; k <= j; ++k) {
        for (int i = k; i <= j; ++i) jac.col(k) += Rotate(phi[i], Perp(w[i]));
      }
      // second derivatives: d jac(:, m) / d theta_k = -sum_{i>=max(k,m)} R w_i
      std::array<Eigen::Matrix<double, 2, 3>, 3> hess{};
      for (int k = 0; k < 3; ++k) {
        hess[k].setZero();
        for (int m = 0; m <= j && k <= j; ++m) {
          for (int i = std::max(k, m); i <= j; ++i) {
            hess[k].col(m) -= Rotate(phi[i], w[i]);
          }
        }
      }

      Vec3 e = Vec3::Zero();
      e.head(j + 1).setOnes();
      planar += link.mass_kg * jac.transpose() * jac +
                link.inertia_kgm2 * e * e.transpose();
      for (int k = 0; k < 3; ++k) {
        const Mat3 t = hess[k].transpose() * jac;
        d_planar[k] += link.mass_kg * (t + t.transpose());
      }

      const double cphi = std::cos(phi[j]), sphi = std::sin(phi[j]);
      yaw += link.mass_kg * com.x() * com.x() + link.inertia_kgm2 * cphi * cphi;
      for (int k = 0; k < 3; ++k) {
        d_yaw[k] += 2.0 * link.mass_kg * com.x() * jac(0, k);
        if (k <= j) d_yaw[k] -= 2.0 * link.inertia_kgm2 * cphi * sphi;
      }

      out.potential += link.mass_kg * g * com.y();
      out.G.tail<3>() += link.mass_kg * g * jac.row(1).transpose();
    }

    out.M(0, 0) = yaw;
    out.M.bottomRightCorner<3, 3>() = planar;
    out.dM[0].setZero();
    for (int k = 0; k < 3; ++k) {
      out.dM[k + 1].setZero();
      out.dM[k + 1](0, 0) = d_yaw[k];
      out.dM[k + 1].bottomRightCorner<3, 3>() = d_planar[k];
    }
    return out;
  }

  Kinematics kin_;
};

}  // namespace digplan
