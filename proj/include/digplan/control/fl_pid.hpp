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

#include <optional>

#include "digplan/common.hpp"
#include "digplan/model/dynamics.hpp"

namespace digplan {

struct PidGains {
  Vec4 kp = Vec4::Constant(100.0);
  Vec4 kd = Vec4::Constant(20.0);
  Vec4 ki = Vec4::Constant(10.0);
  Vec4 integral_clamp = Vec4::Constant(0.05);

  void Validate() const {
    for (int i = 0; i < 4; ++i) {
      if (!(kp[i] >= 0.0)) throw ConfigError("controller.kp", "must be non-negative");
      if (!(kd[i] >= 0.0)) throw ConfigError("controller.kd", "must be non-negative");
      if (!(ki[i] >= 0.0)) throw ConfigError("controller.ki", "must be non-negative");
      if (!(integral_clamp[i] > 0.0)) {
        throw ConfigError("controller.integral_clamp", "must be positive");
      }
    }
  }
};

/// Desired joint state and acceleration from a cylinder-frame reference.
struct JointReference {
  JointState x;
  Vec4 qdd = Vec4::Zero();
};

inline JointReference ToJointReference(const Kinematics& kin, const CylinderState& x_d,
                                       const Vec4& qdd_l) {
  const LinkageJacobians jac = kin.Jacobians(x_d.q, x_d.qd);
  JointReference r;
  r.x = {kin.CylinderToJoint(x_d.q), jac.JL * x_d.qd};
  r.qdd = jac.JL * qdd_l + jac.JL_dot * x_d.qd;
  return r;
}

/// Feedback-linearizing PID in joint coordinates:
///   u = J_theta^-T (h - dhat + M (qdd_d + Kp e + Kd de + Ki int e)).
class FlPidController {
 public:
  FlPidController(const Dynamics& dyn, PidGains gains) : dyn_(&dyn), gains_(std::move(gains)) {
    gains_.Validate();
  }

  const PidGains& gains() const { return gains_; }
  const Vec4& integral() const { return integral_; }

  void Reset() {
    integral_.setZero();
    last_qd_d_.reset();
  }

  /// Reference acceleration given in cylinder coordinates.
  ControlInput Control(const CylinderState& x_d, const Vec4& qdd_l_d, const JointState& x,
                       const Vec4& dhat, double dt) {
    return Apply(ToJointReference(dyn_->kinematics(), x_d, qdd_l_d), x, dhat, dt);
  }

  /// Reference acceleration by finite difference of consecutive desired
  /// joint rates (zero on the first call).
  ControlInput ControlFiniteDifference(const CylinderState& x_d, const JointState& x,
                                       const Vec4& dhat, double dt) {
    JointReference r = ToJointReference(dyn_->kinematics(), x_d, Vec4::Zero());
    r.qdd = last_qd_d_ ? Vec4((r.x.qd - *last_qd_d_) / dt) : Vec4::Zero();
    return Apply(r, x, dhat, dt);
  }

  /// Control law for a joint-frame reference.
  ControlInput Apply(const JointReference& r, const JointState& x, const Vec4& dhat,
                     double dt) {
    if (!(dt > 0.0)) throw ConfigError("controller.dt_s", "step must be positive");
    const Vec4 e = r.x.q - x.q;
    const Vec4 de = r.x.qd - x.qd;
    integral_ = (integral_ + dt * e).cwiseMax(-gains_.integral_clamp).cwiseMin(gains_.integral_clamp);
    last_qd_d_ = r.x.qd;
    const Vec4 v = r.qdd + gains_.kp.cwiseProduct(e) + gains_.kd.cwiseProduct(de) +
                   gains_.ki.cwiseProduct(integral_);
    const DynamicsTerms t = dyn_->Terms(x);
    const Vec4 tau = t.h(x.qd) - dhat + t.M * v;
    const Vec4 q_l = dyn_->kinematics().JointToCylinder(x.q);
    // J_theta^-T = J_L^T
    return dyn_->kinematics().Jacobians(q_l, Vec4::Zero()).JL.transpose() * tau;
  }

 private:
  const Dynamics* dyn_;
  PidGains gains_;
  Vec4 integral_ = Vec4::Zero();
  std::optional<Vec4> last_qd_d_;
};

}  // namespace digplan
