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

// Emulated disturbances for the simulator. Nothing in the planning stack
// includes this file.

#pragma once

#include <array>
#include <cmath>

#include "digplan/common.hpp"
#include "digplan/model/kinematics.hpp"
#include "digplan/terrain/ground.hpp"

namespace digplan {

/// Steady-state friction curve of one cylinder.
struct FrictionParams {
  double coulomb_n = 2000.0;
  double static_n = 3000.0;
  double stribeck_mps = 0.01;
  double viscous_nspm = 5000.0;

  void Validate(const std::string& key) const {
    if (!(coulomb_n > 0.0)) throw ConfigError(key + ".coulomb_n", "must be positive");
    if (!(static_n >= coulomb_n)) {
      throw ConfigError(key + ".static_n", "must be at least the Coulomb level");
    }
    if (!(stribeck_mps > 0.0)) throw ConfigError(key + ".stribeck_mps", "must be positive");
    if (!(viscous_nspm >= 0.0)) throw ConfigError(key + ".viscous_nspm", "must be non-negative");
  }
};

struct CylinderFriction {
  std::array<FrictionParams, 3> cylinders{};
  double swing_viscous_nmspr = 2.0e4;  // swing has no cylinder
};

/// Depth-based cutting resistance.
struct SoilParams {
  double unit_weight_kgpm3 = 1800.0;
  double cohesion_pa = 1.0e4;
  double n_c = 5.0;
  double n_gamma = 1.5;
  double bucket_width_m = 1.4;
  double normal_ratio = 0.3;
  double gravity_mps2 = 9.81;

  void Validate() const {
    if (!(unit_weight_kgpm3 >= 0.0)) throw ConfigError("plant.soil.unit_weight_kgpm3", "must be non-negative");
    if (!(cohesion_pa >= 0.0)) throw ConfigError("plant.soil.cohesion_pa", "must be non-negative");
    if (!(n_c >= 0.0)) throw ConfigError("plant.soil.n_c", "must be non-negative");
    if (!(n_gamma >= 0.0)) throw ConfigError("plant.soil.n_gamma", "must be non-negative");
    if (!(bucket_width_m > 0.0)) throw ConfigError("plant.soil.bucket_width_m", "must be positive");
    if (!(normal_ratio >= 0.0)) throw ConfigError("plant.soil.normal_ratio", "must be non-negative");
  }
};

/// F = sigma2 v + sgn(v) (F_c + (F_s - F_c) exp(-(v / v_s)^2)), sgn(0) = 0.
inline double FrictionForce(double v, const FrictionParams& p) {
  if (v == 0.0) return 0.0;
  const double r = v / p.stribeck_mps;
  const double level = p.coulomb_n + (p.static_n - p.coulomb_n) * std::exp(-r * r);
  return p.viscous_nspm * v + std::copysign(level, v);
}

/// Friction in cylinder coordinates (swing channel viscous only).
inline Vec4 FrictionVector(const Vec4& qd_l, const CylinderFriction& f) {
  Vec4 out;
  out[kSwing] = f.swing_viscous_nmspr * qd_l[kSwing];
  for (int j = 0; j < 3; ++j) out[j + 1] = FrictionForce(qd_l[j + 1], f.cylinders[j]);
  return out;
}

/// Cutting resistance magnitude w d (c N_c + gamma g d N_gamma).
inline double SoilForceMagnitude(double depth, const SoilParams& p) {
  if (!(depth > 0.0)) return 0.0;
  return p.bucket_width_m * depth *
         (p.cohesion_pa * p.n_c + p.unit_weight_kgpm3 * p.gravity_mps2 * depth * p.n_gamma);
}

struct SoilContact {
  double depth = 0.0;
  Vec2 force = Vec2::Zero();  // on the tip, (x, z)
  Vec4 joint = Vec4::Zero();  // J_tip^T force
};

/// Tangential force opposite the tip velocity plus kappa F along the
/// upward normal of the velocity.
inline SoilContact SoilForce(const Kinematics& kin, const JointState& x,
                             const GroundModel& ground, const SoilParams& p) {
  SoilContact out;
  const TipPose tip = kin.TipFromJoint(x.q);
  out.depth = std::max(0.0, ground.Surface(tip.x) - tip.z);
  if (out.depth == 0.0) return out;
  const Mat3 jac = kin.TipJacobianJoint(x.q);
  const Eigen::Matrix<double, 2, 3> jp = jac.topRows<2>();
  const Vec2 vel = jp * x.qd.tail<3>();
  const double speed = vel.norm();
  if (speed < 1e-6) return out;
  const Vec2 dir = vel / speed;
  Vec2 normal(-dir.y(), dir.x());
  if (normal.y() < 0.0) normal = -normal;
  const double f = SoilForceMagnitude(out.depth, p);
  out.force = -f * dir + p.normal_ratio * f * normal;
  out.joint.tail<3>() = jp.transpose() * out.force;
  return out;
}

}  // namespace digplan
