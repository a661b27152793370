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

#include "digplan/model/params.hpp"

namespace digplan {

// Plausible 30-ton-class values. The bundled config/model.json carries the
// same numbers; keep the two in sync.
inline ModelParams DefaultModelParams() {
  ModelParams p;
  p.links[kBoomLink] = {6.0, 2000.0, 3.0, 0.0, 6000.0};
  p.links[kArmLink] = {3.0, 1000.0, 1.5, 0.0, 750.0};
  p.links[kBucketLink] = {1.5, 800.0, 0.75, 0.0, 150.0};
  p.cabin_yaw_inertia_kgm2 = 6.0e4;
  p.boom_pivot_m = Vec2(0.6, 1.8);
  p.linkages[kBoomLink] = {1.0, 2.6, 1.87};
  p.linkages[kArmLink] = {0.6, 2.4, 0.0};
  p.linkages[kBucketLink] = {0.5, 1.8, 0.62};
  p.gravity_mps2 = 9.81;
  p.bucket = {0.9, -0.9, 1.6, 2.7, 1.3};
  return p;
}

inline PhysicalLimits DefaultLimits() {
  PhysicalLimits l;
  l.u_lower = Vec4(-1.5e5, -9.0e5, -6.0e5, -4.0e5);
  l.u_upper = Vec4(1.5e5, 9.0e5, 6.0e5, 4.0e5);
  l.power_max_w = 1.5e5;
  l.length_lower = Vec3(2.10, 1.90, 1.36);
  l.length_upper = Vec3(3.33, 2.93, 2.26);
  l.pumps[0] = {0.006, Vec4(0.001, 0.02, 0.0, 0.02),
                Vec4(0.001, 0.012, 0.0, 0.012)};
  l.pumps[1] = {0.006, Vec4(0.001, 0.02, 0.03, 0.0),
                Vec4(0.001, 0.012, 0.018, 0.0)};
  l.swing_lower_rad = -kPi;
  l.swing_upper_rad = kPi;
  l.velocity_lower = Vec4(-0.8, -0.15, -0.2, -0.2);
  l.velocity_upper = Vec4(0.8, 0.15, 0.2, 0.2);
  return l;
}

}  // namespace digplan
