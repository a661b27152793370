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

#include <algorithm>
#include <string>
#include <utility>

#include "digplan/common.hpp"
#include "digplan/model/params.hpp"

namespace digplan {

/// Swing angle plus boom/arm/bucket joint angles and their rates.
struct JointState {
  Vec4 q = Vec4::Zero();
  Vec4 qd = Vec4::Zero();
};

/// Swing angle plus boom/arm/bucket cylinder lengths and their rates.
struct CylinderState {
  Vec4 q = Vec4::Zero();
  Vec4 qd = Vec4::Zero();

  Vec8 stacked() const {
    Vec8 x;
    x << q, qd;
    return x;
  }
  static CylinderState FromStacked(const Vec8& x) {
    return {x.head<4>(), x.tail<4>()};
  }
  Vec3 lengths() const { return q.tail<3>(); }
};

/// [T_U, F_B, F_A, F_K]: swing torque and three cylinder forces.
using ControlInput = Vec4;

/// Bucket tip position and orientation in the cabin frame.
struct TipPose {
  double x = 0.0;
  double z = 0.0;
  double theta = 0.0;
};

/// Jacobians of the closed-chain map. `JL` takes cylinder rates to joint
/// rates, `Jtheta` is its inverse and `JL_dot` the time derivative of `JL`.
struct LinkageJacobians {
  Mat4 JL = Mat4::Identity();
  Mat4 Jtheta = Mat4::Identity();
  Mat4 JL_dot = Mat4::Zero();
};

inline constexpr double kSingularSine = 1e-9;

/// Direction of a link at absolute angle phi.
inline Vec2 LinkDirection(double phi) {
  return {std::cos(phi), -std::sin(phi)};
}

/// Angle of a direction in the same convention as LinkDirection.
inline double DirectionAngle(double dx, double dz) {
  return std::atan2(-dz, dx);
}

// Single-linkage maps. Exposed for the unit tests.
inline double LinkageLength(const LinkageParams& p, double theta) {
  const double beta = p.angle_offset_rad + theta;
  if (!(beta > 0.0 && beta < kPi)) {
    throw DomainError("linkage angle " + std::to_string(beta) +
                      " outside (0, pi)");
  }
  const double d = p.a_m - p.b_m;
  const double half = std::sin(0.5 * beta);
  return std::sqrt(d * d + 4.0 * p.a_m * p.b_m * half * half);
}

inline double LinkageAngle(const LinkageParams& p, double length) {
  const double a = p.a_m, b = p.b_m;
  if (!(length > std::abs(a - b) && length < a + b)) {
    throw DomainError("cylinder length " + std::to_string(length) +
                      " violates the triangle inequality");
  }
  const double c = (a * a + b * b - length * length) / (2.0 * a * b);
  return std::acos(std::clamp(c, -1.0, 1.0)) - p.angle_offset_rad;
}

// d(theta)/dL at a given joint angle and length.
inline double LinkageAngleRate(const LinkageParams& p, double theta,
                               double length) {
  const double s = std::sin(p.angle_offset_rad + theta);
  if (s < kSingularSine) {
    throw SingularityError("linkage at fold: sin = " + std::to_string(s));
  }
  return length / (p.a_m * p.b_m * s);
}

/// Closed-chain kinematics and forward kinematics of the digging arm.
class Kinematics {
 public:
  explicit Kinematics(ModelParams params) : params_(std::move(params)) {}

  const ModelParams& params() const { return params_; }

  Vec4 JointToCylinder(const Vec4& q_theta) const {
    Vec4 q_l;
    q_l[kSwing] = q_theta[kSwing];
    for (int j = 0; j < 3; ++j) {
      q_l[j + 1] = LinkageLength(params_.linkages[j], q_theta[j + 1]);
    }
    return q_l;
  }

  Vec4 CylinderToJoint(const Vec4& q_l) const {
    Vec4 q_theta;
    q_theta[kSwing] = q_l[kSwing];
    for (int j = 0; j < 3; ++j) {
      q_theta[j + 1] = LinkageAngle(params_.linkages[j], q_l[j + 1]);
    }
    return q_theta;
  }

  JointState ToJoint(const CylinderState& x) const {
    const LinkageJacobians jac = Jacobians(x.q, x.qd);
    return {CylinderToJoint(x.q), jac.JL * x.qd};
  }

  CylinderState ToCylinder(const JointState& x) const {
    const Vec4 q_l = JointToCylinder(x.q);
    const LinkageJacobians jac = Jacobians(q_l, Vec4::Zero());
    return {q_l, jac.Jtheta * x.qd};
  }

  /// Jacobians at a cylinder configuration; `qd_l` feeds only JL_dot.
  LinkageJacobians Jacobians(const Vec4& q_l, const Vec4& qd_l) const {
    LinkageJacobians out;
    for (int j = 0; j < 3; ++j) {
      const LinkageParams& p = params_.linkages[j];
      const double length = q_l[j + 1];
      const double theta = LinkageAngle(p, length);
      const double beta = p.angle_offset_rad + theta;
      const double rate = LinkageAngleRate(p, theta, length);
      const double ab = p.a_m * p.b_m;
      const double s = std::sin(beta);
      const double beta_dot = rate * qd_l[j + 1];
      out.JL(j + 1, j + 1) = rate;
      out.Jtheta(j + 1, j + 1) = 1.0 / rate;
      out.JL_dot(j + 1, j + 1) = qd_l[j + 1] / (ab * s) -
                                 length * std::cos(beta) * beta_dot / (ab * s * s);
    }
    return out;
  }

  TipPose TipFromJoint(const Vec4& q_theta) const {
    const Vec3 angles = q_theta.tail<3>();
    Vec2 p = params_.boom_pivot_m;
    double phi = 0.0;
    for (int j = 0; j < 3; ++j) {
      phi += angles[j];
      p += params_.links[j].length_m * LinkDirection(phi);
    }
    return {p.x(), p.y(), phi};
  }

  TipPose TipFromLengths(const Vec3& lengths) const {
    Vec4 q_l;
    q_l << 0.0, lengths;
    return TipFromJoint(CylinderToJoint(q_l));
  }

  /// d(E_x, E_z, theta) / d(theta_B, theta_A, theta_K).
  Mat3 TipJacobianJoint(const Vec4& q_theta) const {
    Mat3 jac = Mat3::Zero();
    double phi = 0.0;
    for (int j = 0; j < 3; ++j) {
      phi += q_theta[j + 1];
      const double l = params_.links[j].length_m;
      // d/dphi of l * (cos phi, -sin phi).
      const Vec2 dp(-l * std::sin(phi), -l * std::cos(phi));
      for (int k = 0; k <= j; ++k) jac.block<2, 1>(0, k) += dp;
    }
    jac.row(2).setOnes();
    return jac;
  }

  /// d(E_x, E_z, theta) / d(L_B, L_A, L_K).
  Mat3 TipJacobianLengths(const Vec3& lengths) const {
    Vec4 q_l;
    q_l << 0.0, lengths;
    const Vec4 q_theta = CylinderToJoint(q_l);
    const LinkageJacobians jac = Jacobians(q_l, Vec4::Zero());
    return TipJacobianJoint(q_theta) * jac.JL.bottomRightCorner<3, 3>();
  }

  /// Closed-form inverse kinematics of the planar arm for a tip pose, with
  /// the arm folded downward (positive arm angle). Returns joint angles
  /// (theta_B, theta_A, theta_K) or throws DomainError if out of reach.
  Vec3 PlanarInverse(const TipPose& tip) const {
    const double lb = params_.links[kBoomLink].length_m;
    const double la = params_.links[kArmLink].length_m;
    const double lk = params_.links[kBucketLink].length_m;
    const Vec2 wrist = Vec2(tip.x, tip.z) - lk * LinkDirection(tip.theta);
    const Vec2 r = wrist - params_.boom_pivot_m;
    const double d2 = r.squaredNorm();
    const double c = (d2 - lb * lb - la * la) / (2.0 * lb * la);
    if (!(c > -1.0 && c < 1.0)) {
      throw DomainError("tip pose out of reach");
    }
    const double arm = std::acos(c);
    const double boom = DirectionAngle(r.x(), r.y()) -
                        std::atan2(la * std::sin(arm), lb + la * std::cos(arm));
    return {boom, arm, tip.theta - boom - arm};
  }

  /// Cylinder lengths for a tip pose (throws when outside the linkage range).
  Vec3 LengthsForTip(const TipPose& tip) const {
    const Vec3 angles = PlanarInverse(tip);
    Vec4 q_theta;
    q_theta << 0.0, angles;
    return JointToCylinder(q_theta).tail<3>();
  }

 private:
  ModelParams params_;
};

}  // namespace digplan
