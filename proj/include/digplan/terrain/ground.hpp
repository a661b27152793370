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

#include <string>
#include <vector>

#include "digplan/common.hpp"

namespace digplan {

// Coefficients in ascending degree.
inline double PolyEval(const std::vector<double>& a, double x) {
  double z = 0.0;
  for (auto it = a.rbegin(); it != a.rend(); ++it) z = z * x + *it;
  return z;
}

inline double PolyDerivative(const std::vector<double>& a, double x) {
  double z = 0.0;
  for (std::size_t k = a.size(); k-- > 1;) z = z * x + static_cast<double>(k) * a[k];
  return z;
}

// Definite integral over [lo, hi] from the exact antiderivative.
inline double PolyIntegral(const std::vector<double>& a, double lo, double hi) {
  const auto antiderivative = [&](double x) {
    double z = 0.0;
    for (std::size_t k = a.size(); k-- > 0;) z = z * x + a[k] / static_cast<double>(k + 1);
    return z * x;
  };
  return antiderivative(hi) - antiderivative(lo);
}

enum class GroundLayer { kSurface, kTarget };

/// Earth surface and desired target shape over the region of interest.
struct GroundModel {
  std::vector<double> surface{0.0};
  std::vector<double> target{0.0};
  double x_min = 0.0;
  double x_max = 1.0;

  double Surface(double x) const { return PolyEval(surface, x); }
  double Target(double x) const { return PolyEval(target, x); }
  double SurfaceSlope(double x) const { return PolyDerivative(surface, x); }

  // Throws ConfigError when the region is empty or the target rises above
  // the surface anywhere on a 2001-point grid.
  void Validate(const std::string& key_prefix = "ground") const {
    if (surface.empty()) throw ConfigError(key_prefix + ".surface_coeffs", "empty");
    if (target.empty()) throw ConfigError(key_prefix + ".target_coeffs", "empty");
    if (!(x_min < x_max)) {
      throw ConfigError(key_prefix + ".x_min_m", "region must satisfy x_min < x_max");
    }
    constexpr int kGrid = 2001;
    for (int k = 0; k < kGrid; ++k) {
      const double x = x_min + (x_max - x_min) * k / (kGrid - 1);
      if (Target(x) > Surface(x)) {
        throw ConfigError(key_prefix + ".target_coeffs",
                          "target above surface at x = " + std::to_string(x));
      }
    }
  }
};

inline double EvalGround(const GroundModel& g, GroundLayer which, double x) {
  if (!(x >= g.x_min && x <= g.x_max)) {
    throw DomainError("x = " + std::to_string(x) + " outside the region of interest");
  }
  return which == GroundLayer::kSurface ? g.Surface(x) : g.Target(x);
}

}  // namespace digplan
