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
#include "digplan/model/params.hpp"

namespace digplan {

/// Constant normalization factors taken from the physical limits. Inputs
/// and disturbances share the per-channel input factor max(|u_l|, |u_u|).
class Normalizer {
 public:
  explicit Normalizer(const PhysicalLimits& lim) : lim_(lim) {
    for (int j = 0; j < 4; ++j) {
      input_[j] = std::max(std::abs(lim.u_lower[j]), std::abs(lim.u_upper[j]));
      if (!(input_[j] > 0.0)) throw ConfigError("limits.u_upper", "zero input range");
    }
    if (!(lim.power_max_w > 0.0)) throw ConfigError("limits.power_max_w", "must be positive");
    for (int i = 0; i < 2; ++i) {
      if (!(lim.pumps[i].flow_max_m3ps > 0.0)) {
        throw ConfigError("limits.pumps.flow_max_m3ps", "must be positive");
      }
    }
    range_ = lim.length_upper - lim.length_lower;
    if ((range_.array() <= 0.0).any()) throw ConfigError("limits.length_upper_m", "empty stroke");
  }

  Vec4 Input(const Vec4& u) const { return u.cwiseQuotient(input_); }
  Vec4 InputInverse(const Vec4& n) const { return n.cwiseProduct(input_); }
  Vec4 Disturbance(const Vec4& d) const { return Input(d); }
  Vec4 DisturbanceInverse(const Vec4& n) const { return InputInverse(n); }
  double Power(double p) const { return p / lim_.power_max_w; }
  double PowerInverse(double n) const { return n * lim_.power_max_w; }
  double Flow(int pump, double f) const { return f / lim_.pumps[pump].flow_max_m3ps; }
  double FlowInverse(int pump, double n) const { return n * lim_.pumps[pump].flow_max_m3ps; }
  Vec3 Length(const Vec3& l) const { return (l - lim_.length_lower).cwiseQuotient(range_); }
  Vec3 LengthInverse(const Vec3& n) const { return lim_.length_lower + n.cwiseProduct(range_); }

  const Vec4& input_factor() const { return input_; }

 private:
  PhysicalLimits lim_;
  Vec4 input_ = Vec4::Ones();
  Vec3 range_ = Vec3::Ones();
};

}  // namespace digplan
