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

// Volume and clearance geometry of a cutting pass. All volumes are per unit
// bucket width. The tip travels toward the cabin, so x decreases along a path.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "digplan/common.hpp"
#include "digplan/model/kinematics.hpp"
#include "digplan/model/params.hpp"
#include "digplan/terrain/ground.hpp"

namespace digplan {

using TipPath = std::vector<TipPose>;

struct BucketCapacityCurve {
  double theta_empty = 1.6;
  double theta_full = 2.7;
  double v_max = 1.0;

  void Validate(const std::string& key_prefix = "bucket") const {
    if (!(0.0 < theta_empty && theta_empty < theta_full && theta_full < kPi)) {
      throw ConfigError(key_prefix + ".theta_empty_rad",
                        "need 0 < theta_empty < theta_full < pi");
    }
    if (!(v_max > 0.0)) throw ConfigError(key_prefix + ".capacity_m3", "must be positive");
  }
};

/// Trapezoidal swept area between the surface and the path. The surface part
/// is integrated exactly; the path part uses uniform trapezoid weights.
inline double SweptVolume(const TipPath& path, const GroundModel& g) {
  const int n = static_cast<int>(path.size()) - 1;
  if (n < 1) throw DomainError("swept volume needs at least two waypoints");
  const double x0 = path.front().x, xn = path.back().x;
  if (!(xn < x0)) throw DomainError("path must end closer to the cabin than it starts");
  double weighted = path.front().z + path.back().z;
  for (int i = 1; i < n; ++i) weighted += 2.0 * path[i].z;
  return PolyIntegral(g.surface, xn, x0) - weighted / (2.0 * n) * (x0 - xn);
}

inline double BucketCapacity(double theta, const BucketCapacityCurve& c) {
  if (!(theta < kPi)) throw DomainError("bucket angle at or beyond pi spills the load");
  if (theta <= c.theta_empty) return 0.0;
  if (theta >= c.theta_full) return c.v_max;
  const double s = (theta - c.theta_empty) / (c.theta_full - c.theta_empty);
  return c.v_max * s * s * (3.0 - 2.0 * s);
}

enum class VolumeBranch { kSwept, kCapacity };

struct ExcavatedVolume {
  double value = 0.0;
  double swept = 0.0;
  double capacity = 0.0;
  VolumeBranch active = VolumeBranch::kSwept;
};

inline ExcavatedVolume ComputeExcavatedVolume(const TipPath& path, const GroundModel& g,
                                              const BucketCapacityCurve& c) {
  ExcavatedVolume v;
  v.swept = SweptVolume(path, g);
  v.capacity = BucketCapacity(path.back().theta, c);
  v.active = v.swept <= v.capacity ? VolumeBranch::kSwept : VolumeBranch::kCapacity;
  v.value = std::min(v.swept, v.capacity);
  return v;
}

// Direction of tip travel at waypoint i from the backward difference, in the
// same angle convention as link directions. Waypoint 0 borrows segment 1.
inline double TravelAngle(const TipPath& path, int i) {
  const int k = std::max(i, 1);
  if (k >= static_cast<int>(path.size())) throw DomainError("waypoint index out of range");
  const double dx = path[k].x - path[k - 1].x;
  const double dz = path[k].z - path[k - 1].z;
  if (dx == 0.0 && dz == 0.0) throw DomainError("degenerate path segment");
  return DirectionAngle(dx, dz);
}

/// Angle between the tip velocity and the bottom plate, positive when the
/// plate trails above the cut.
inline double ClearanceAngle(const TipPath& path, int i, double plate_angle_offset) {
  const double plate = path[i].theta - plate_angle_offset;
  return WrapAngle(TravelAngle(path, i) - plate);
}

struct BucketTriangle {
  Vec2 tip, heel, pin;
};

inline BucketTriangle PlaceBucket(const TipPose& tip, const BucketGeometry& b,
                                  double tip_to_pin) {
  const Vec2 t(tip.x, tip.z);
  return {t, t - b.tip_to_heel_m * LinkDirection(tip.theta - b.plate_angle_offset_rad),
          t - tip_to_pin * LinkDirection(tip.theta)};
}

// Height of the ground already cut when the tip is at waypoint i: the path
// polyline over the traversed span, the untouched surface elsewhere.
inline double CutProfile(const TipPath& path, int i, const GroundModel& g, double x) {
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 1; k <= i; ++k) {
    const TipPose& a = path[k - 1];
    const TipPose& b = path[k];
    const double lo = std::min(a.x, b.x), hi = std::max(a.x, b.x);
    if (x < lo || x > hi) continue;
    const double z = hi == lo ? std::max(a.z, b.z) : a.z + (b.z - a.z) * (x - a.x) / (b.x - a.x);
    best = std::max(best, z);
  }
  if (i == 0 && x == path[0].x) best = path[0].z;
  return std::isfinite(best) ? best : g.Surface(x);
}

/// Smallest height of the heel and pin above the cut profile. The tip sits on
/// the path by construction and is not counted.
inline double BodyAbovePath(const TipPath& path, int i, const GroundModel& g,
                            const BucketGeometry& b, double tip_to_pin) {
  const BucketTriangle tri = PlaceBucket(path[i], b, tip_to_pin);
  double m = std::numeric_limits<double>::infinity();
  for (const Vec2& v : {tri.heel, tri.pin}) m = std::min(m, v.y() - CutProfile(path, i, g, v.x()));
  return m;
}

enum class Phase2Check : int { kRegion = 0, kMonotone, kClearance, kBody, kSpill };
inline constexpr int kNumPhase2Checks = 5;
inline constexpr std::array<const char*, kNumPhase2Checks> kPhase2CheckNames = {
    "region", "monotone_theta", "clearance_angle", "body_above_path", "below_pi"};

struct Phase2Report {
  static constexpr double kTolerance = 1e-6;
  // Worst violation per check (0 when satisfied) and the waypoint it occurs at.
  std::array<double, kNumPhase2Checks> violation{};
  std::array<int, kNumPhase2Checks> index{-1, -1, -1, -1, -1};

  bool Passed(Phase2Check c) const { return violation[static_cast<int>(c)] <= kTolerance; }
  bool AllPassed() const {
    return std::all_of(violation.begin(), violation.end(),
                       [](double v) { return v <= kTolerance; });
  }

  void Record(Phase2Check c, int i, double v) {
    auto& w = violation[static_cast<int>(c)];
    if (v > w) {
      w = v;
      index[static_cast<int>(c)] = i;
    }
  }
};

inline Phase2Report ValidatePhase2(const TipPath& path, const GroundModel& g,
                                   const BucketGeometry& b, double tip_to_pin) {
  Phase2Report r;
  const int n = static_cast<int>(path.size()) - 1;
  for (int i = 0; i <= n; ++i) {
    const TipPose& p = path[i];
    const double zs = g.Surface(p.x), zt = g.Target(p.x);
    r.Record(Phase2Check::kRegion, i,
             std::max({g.x_min - p.x, p.x - g.x_max, zt - p.z, p.z - zs}));
    if (i == 0 || i == n) r.Record(Phase2Check::kRegion, i, std::abs(p.z - zs));
    if (i < n) r.Record(Phase2Check::kMonotone, i + 1, p.theta - path[i + 1].theta);
    if (i >= 1) {
      const bool degenerate = p.x == path[i - 1].x && p.z == path[i - 1].z;
      r.Record(Phase2Check::kClearance, i,
               degenerate ? kPi : -ClearanceAngle(path, i, b.plate_angle_offset_rad));
    }
    r.Record(Phase2Check::kBody, i, -BodyAbovePath(path, i, g, b, tip_to_pin));
    r.Record(Phase2Check::kSpill, i, p.theta - kPi);
  }
  return r;
}

}  // namespace digplan
