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
#include <array>
#include <limits>

#include "digplan/common.hpp"
#include "digplan/model/kinematics.hpp"
#include "digplan/model/params.hpp"

namespace digplan {

enum class ConstraintFamily : int { kForce = 0, kPower, kLength, kFlow };
inline constexpr int kNumFamilies = 4;
inline constexpr std::array<const char*, kNumFamilies> kFamilyNames = {
    "force", "power", "length", "flow"};

/// Residuals of the physical limits, all oriented so that >= 0 is feasible.
/// Flat layout (17 rows): u - u_l (4), u_u - u (4), power (1), L - L_l (3),
/// L_u - L (3), flow (2).
struct ConstraintResiduals {
  static constexpr int kSize = 17;
  static constexpr int kStateOnlyBegin = 9;  // rows 9..16 ignore the input

  Eigen::Matrix<double, kSize, 1> values =
      Eigen::Matrix<double, kSize, 1>::Zero();

  auto force_lower() const { return values.segment<4>(0); }
  auto force_upper() const { return values.segment<4>(4); }
  double power() const { return values[8]; }
  auto length_lower() const { return values.segment<3>(9); }
  auto length_upper() const { return values.segment<3>(12); }
  auto flow() const { return values.segment<2>(15); }

  static ConstraintFamily FamilyOf(int row) {
    if (row < 8) return ConstraintFamily::kForce;
    if (row == 8) return ConstraintFamily::kPower;
    if (row < 15) return ConstraintFamily::kLength;
    return ConstraintFamily::kFlow;
  }

  std::array<double, kNumFamilies> FamilyMinima() const {
    std::array<double, kNumFamilies> out;
    out.fill(std::numeric_limits<double>::infinity());
    for (int r = 0; r < kSize; ++r) {
      auto& m = out[static_cast<int>(FamilyOf(r))];
      m = std::min(m, values[r]);
    }
    return out;
  }

  double Min() const { return values.minCoeff(); }
};

/// Pump flow A_i(sgn(qd))^T |qd|. A zero rate uses the expand area, which
/// multiplies zero either way.
inline double PumpFlow(const PumpParams& pump, const Vec4& qd) {
  double f = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double area = qd[j] >= 0.0 ? pump.area_expand[j] : pump.area_contract[j];
    f += area * std::abs(qd[j]);
  }
  return f;
}

inline ConstraintResiduals EvaluateConstraints(const CylinderState& x,
                                               const ControlInput& u,
                                               const PhysicalLimits& lim) {
  ConstraintResiduals r;
  r.values.segment<4>(0) = u - lim.u_lower;
  r.values.segment<4>(4) = lim.u_upper - u;
  r.values[8] = lim.power_max_w - u.dot(x.qd);
  r.values.segment<3>(9) = x.lengths() - lim.length_lower;
  r.values.segment<3>(12) = lim.length_upper - x.lengths();
  for (int i = 0; i < 2; ++i) {
    r.values[15 + i] = lim.pumps[i].flow_max_m3ps - PumpFlow(lim.pumps[i], x.qd);
  }
  return r;
}

/// Normalization factor of each residual row: force rows by the larger
/// magnitude of the channel's limits, power by p_u, strokes by their range,
/// flow by the pump bound.
inline Eigen::Matrix<double, ConstraintResiduals::kSize, 1> ResidualScales(
    const PhysicalLimits& lim) {
  Eigen::Matrix<double, ConstraintResiduals::kSize, 1> s;
  for (int j = 0; j < 4; ++j) {
    const double f = std::max(std::abs(lim.u_lower[j]), std::abs(lim.u_upper[j]));
    s[j] = f;
    s[4 + j] = f;
  }
  s[8] = lim.power_max_w;
  for (int j = 0; j < 3; ++j) {
    const double range = lim.length_upper[j] - lim.length_lower[j];
    s[9 + j] = range;
    s[12 + j] = range;
  }
  s[15] = lim.pumps[0].flow_max_m3ps;
  s[16] = lim.pumps[1].flow_max_m3ps;
  return s;
}

}  // namespace digplan
