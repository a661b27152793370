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

#include <cmath>
#include <sstream>

#include "digplan/common.hpp"
#include "digplan/model/dynamics.hpp"
#include "digplan/plant/disturbance_models.hpp"
#include "digplan/terrain/ground.hpp"

namespace digplan {

struct PlantConfig {
  double dt = 0.001;
  bool friction_enabled = true;
  bool soil_enabled = true;
  CylinderFriction friction{};
  SoilParams soil{};
  GroundModel ground{};
  // Constant joint-frame disturbance added on top of the models.
  Vec4 injected = Vec4::Zero();

  void Validate() const {
    if (!(dt > 0.0 && dt <= 0.01)) throw ConfigError("plant.dt_s", "must lie in (0, 0.01]");
    for (int j = 0; j < 3; ++j) {
      friction.cylinders[j].Validate("plant.friction.cylinders[" + std::to_string(j) + "]");
    }
    if (!(friction.swing_viscous_nmspr >= 0.0)) {
      throw ConfigError("plant.friction.swing_viscous_nmspr", "must be non-negative");
    }
    soil.Validate();
  }
};

struct PlantState {
  JointState x;
  double t = 0.0;
  Vec4 delta = Vec4::Zero();  // true disturbance at x
  double soil_depth = 0.0;
  Vec2 soil_force = Vec2::Zero();
  Vec2 tip_velocity = Vec2::Zero();
};

/// Ground-truth simulator: rigid-body dynamics plus friction and soil
/// disturbances, integrated with classical RK4.
class Plant {
 public:
  Plant(const ModelParams& model, PlantConfig config)
      : dyn_(model), cfg_(std::move(config)) {
    cfg_.Validate();
  }

  const Dynamics& dynamics() const { return dyn_; }
  const PlantConfig& config() const { return cfg_; }
  const PlantState& state() const { return state_; }
  void set_injected(const Vec4& d) { cfg_.injected = d; }

  void Reset(const JointState& x, double t = 0.0) {
    state_ = PlantState{};
    state_.x = x;
    state_.t = t;
    Record(state_.x);
  }

  /// Joint-frame disturbance at a state: soil plus J_theta^T (-friction).
  Vec4 Disturbance(const JointState& x) const {
    Vec4 d = cfg_.injected;
    if (cfg_.soil_enabled) d += SoilForce(dyn_.kinematics(), x, cfg_.ground, cfg_.soil).joint;
    if (cfg_.friction_enabled) {
      const Vec4 q_l = dyn_.kinematics().JointToCylinder(x.q);
      const LinkageJacobians jac = dyn_.kinematics().Jacobians(q_l, Vec4::Zero());
      d -= jac.Jtheta.transpose() * FrictionVector(jac.Jtheta * x.qd, cfg_.friction);
    }
    return d;
  }

  Vec8 Derivative(const JointState& x, const ControlInput& u) const {
    return dyn_.ForwardTheta(x, u, Disturbance(x));
  }

  /// Integrates over `duration` with u held, in substeps of at most dt.
  const PlantState& Advance(const ControlInput& u, double duration) {
    if (!u.allFinite()) throw DivergenceError(Diagnostics("non-finite input"));
    const int n = std::max(1, static_cast<int>(std::ceil(duration / cfg_.dt - 1e-9)));
    const double h = duration / n;
    for (int i = 0; i < n; ++i) Step(u, h);
    return state_;
  }

  /// One RK4 step of length h <= dt.
  const PlantState& Step(const ControlInput& u, double h) {
    if (!(h > 0.0 && h <= cfg_.dt * (1.0 + 1e-12))) {
      throw ConfigError("plant.dt_s", "step longer than the plant step");
    }
    Vec8 s;
    s << state_.x.q, state_.x.qd;
    auto f = [&](double, const Vec8& z) -> Vec8 {
      return Derivative(JointState{z.head<4>(), z.tail<4>()}, u);
    };
    try {
      s = Rk4Step(f, state_.t, s, h);
    } catch (const std::exception& e) {
      throw DivergenceError(Diagnostics(e.what()));
    }
    if (!s.allFinite() || s.tail<4>().cwiseAbs().maxCoeff() > 1e3) {
      throw DivergenceError(Diagnostics("state blew up"));
    }
    state_.x = {s.head<4>(), s.tail<4>()};
    state_.t += h;
    Record(state_.x);
    return state_;
  }

  /// Kinetic plus potential energy.
  double Energy(const JointState& x) const {
    return dyn_.KineticEnergy(x) + dyn_.PotentialEnergy(x.q);
  }

 private:
  void Record(const JointState& x) {
    state_.delta = Disturbance(x);
    const SoilContact c = SoilForce(dyn_.kinematics(), x, cfg_.ground, cfg_.soil);
    state_.soil_depth = c.depth;
    state_.soil_force = cfg_.soil_enabled ? c.force : Vec2::Zero();
    state_.tip_velocity =
        dyn_.kinematics().TipJacobianJoint(x.q).topRows<2>() * x.qd.tail<3>();
  }

  std::string Diagnostics(const std::string& why) const {
    std::ostringstream os;
    os << "plant diverged at t = " << state_.t << " s: " << why
       << "; q = [" << state_.x.q.transpose() << "], qd = [" << state_.x.qd.transpose() << "]";
    return os.str();
  }

  Dynamics dyn_;
  PlantConfig cfg_;
  PlantState state_;
};

}  // namespace digplan
