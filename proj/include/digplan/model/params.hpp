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

namespace digplan {

/// Rigid planar link. The center of mass sits `com_along_m` along the link
/// axis from the proximal joint and `com_normal_m` along the in-plane normal.
struct LinkParams {
  double length_m = 1.0;
  double mass_kg = 1.0;
  double com_along_m = 0.5;
  double com_normal_m = 0.0;
  double inertia_kgm2 = 1.0;  // about the lateral axis through the COM
};

/// Triangle linkage: two anchors at distances a and b from the joint; the
/// cylinder closes the triangle. The included angle is offset + joint angle.
struct LinkageParams {
  double a_m = 1.0;
  double b_m = 1.0;
  double angle_offset_rad = 0.0;
};

struct BucketGeometry {
  double tip_to_heel_m = 0.9;
  // Angle from the bottom plate (heel -> tip) to the pin -> tip line.
  double plate_angle_offset_rad = -0.9;
  double theta_empty_rad = 1.6;
  double theta_full_rad = 2.7;
  double capacity_m3 = 1.3;
};

/// Geometry and inertia of a swing + boom/arm/bucket excavator.
///
/// Frame conventions: cabin frame with x forward and z up, origin on the
/// swing axis. Planar joint angles are rotations about the lateral axis with
/// positive angles pitching the link downward, so a link at absolute angle
/// phi points along (cos phi, -sin phi). The bucket angle theta is the sum of
/// the three planar joint angles; it grows as the bucket curls toward the
/// cabin, and theta = pi has the pin -> tip line pointing straight back.
struct ModelParams {
  std::array<LinkParams, 3> links{};
  double cabin_yaw_inertia_kgm2 = 5.0e4;
  Vec2 boom_pivot_m{0.6, 1.8};
  std::array<LinkageParams, 3> linkages{};
  double gravity_mps2 = 9.81;
  BucketGeometry bucket{};

  double tip_to_pin_m() const { return links[kBucketLink].length_m; }
};

/// Expand/contract areas of every actuator as seen from one pump.
struct PumpParams {
  double flow_max_m3ps = 1.0;
  Vec4 area_expand = Vec4::Ones();
  Vec4 area_contract = Vec4::Ones();
};

/// Force/torque, power, stroke and flow limits, plus the position and
/// velocity boxes used by the global planner.
struct PhysicalLimits {
  Vec4 u_lower = Vec4::Constant(-1.0);
  Vec4 u_upper = Vec4::Constant(1.0);
  double power_max_w = 1.0;
  Vec3 length_lower = Vec3::Zero();
  Vec3 length_upper = Vec3::Ones();
  std::array<PumpParams, 2> pumps{};

  double swing_lower_rad = -kPi;
  double swing_upper_rad = kPi;
  Vec4 velocity_lower = Vec4::Constant(-1.0);
  Vec4 velocity_upper = Vec4::Constant(1.0);

  Vec4 position_lower() const {
    return Vec4(swing_lower_rad, length_lower[0], length_lower[1],
                length_lower[2]);
  }
  Vec4 position_upper() const {
    return Vec4(swing_upper_rad, length_upper[0], length_upper[1],
                length_upper[2]);
  }
};

}  // namespace digplan
