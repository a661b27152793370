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

#include "digplan/common.hpp"
#include "digplan/model/dynamics.hpp"

namespace digplan {

/// Generalized-momentum disturbance observer in joint coordinates.
///
///   dhat = K (p - p0 - int (J_theta^T u + C^T qd - G + dhat) dt),  p = M qd
///
/// The integral uses the trapezoidal rule. dhat enters the integrand at both
/// ends of the step; the new estimate appears linearly, so the implicit
/// update is solved in closed form. With exact model terms dhat follows
/// d(dhat)/dt = K (delta - dhat).
class MomentumObserver {
 public:
  MomentumObserver(const Dynamics& dyn, Vec4 gain) : dyn_(&dyn), gain_(std::move(gain)) {
    for (int i = 0; i < 4; ++i) {
      if (!(gain_[i] > 0.0) || !std::isfinite(gain_[i])) {
        throw ConfigError("observer.gain_per_s", "gain entries must be positive and finite");
      }
    }
  }

  /// Starts from a measured joint state. A nonzero `estimate` restarts a
  /// running observer: p0 absorbs it so the estimate continues unchanged.
  void Init(const JointState& x, const Vec4& estimate = Vec4::Zero()) {
    p0_ = Momentum(x) - estimate.cwiseQuotient(gain_);
    integral_.setZero();
    estimate_ = estimate;
    last_ = x;
  }

  /// Advances by dt from the previous sample. `x` is the state at the end
  /// of the step and `u` the cylinder-frame input held over it.
  const Vec4& Update(const JointState& x, const ControlInput& u, double dt) {
    if (!(dt > 0.0)) throw ConfigError("observer.dt_s", "step must be positive");
    const Vec4 free_start = FreeTerms(last_, u);
    const Vec4 free_end = FreeTerms(x, u);
    const Vec4 p = Momentum(x);
    const double h = 0.5 * dt;
    // I1 = I0 + h (f0 + dhat0 + f1 + dhat1), dhat1 = K (p - p0 - I1).
    const Vec4 partial = integral_ + h * (free_start + estimate_ + free_end);
    const Vec4 k = gain_;
    Vec4 next;
    for (int i = 0; i < 4; ++i) {
      next[i] = k[i] * (p[i] - p0_[i] - partial[i]) / (1.0 + h * k[i]);
    }
    integral_ = partial + h * next;
    estimate_ = next;
    last_ = x;
    if (!estimate_.allFinite()) throw DivergenceError("non-finite disturbance estimate");
    return estimate_;
  }

  /// True when dt is long compared with the observer bandwidth.
  bool StepTooLong(double dt) const { return dt > 0.1 / gain_.maxCoeff(); }

  const Vec4& estimate() const { return estimate_; }
  const Vec4& gain() const { return gain_; }
  const Vec4& initial_momentum() const { return p0_; }

  /// Delta_L = J_L^T dhat.
  Vec4 CylinderEstimate(const Vec4& q_l) const {
    return ToCylinderFrame(dyn_->kinematics(), estimate_, q_l);
  }

  static Vec4 ToCylinderFrame(const Kinematics& kin, const Vec4& delta,
                              const Vec4& q_l) {
    return kin.Jacobians(q_l, Vec4::Zero()).JL.transpose() * delta;
  }

 private:
  Vec4 Momentum(const JointState& x) const { return dyn_->MassMatrix(x.q) * x.qd; }

  // J_theta^T u + C^T qd - G
  Vec4 FreeTerms(const JointState& x, const ControlInput& u) const {
    const DynamicsTerms t = dyn_->Terms(x);
    return dyn_->JointForce(x.q, u) + t.C.transpose() * x.qd - t.G;
  }

  const Dynamics* dyn_;
  Vec4 gain_;
  Vec4 p0_ = Vec4::Zero();
  Vec4 integral_ = Vec4::Zero();
  Vec4 estimate_ = Vec4::Zero();
  JointState last_;
};

}  // namespace digplan
