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
#include <cmath>
#include <vector>

#include "digplan/common.hpp"

namespace digplan {

// B_{k,n}(s) for k = 0..n.
inline std::vector<double> BernsteinBasis(int n, double s) {
  std::vector<double> b(n + 1, 0.0);
  b[0] = 1.0;
  const double r = 1.0 - s;
  for (int j = 1; j <= n; ++j) {
    double saved = 0.0;
    for (int k = 0; k < j; ++k) {
      const double tmp = b[k];
      b[k] = saved + r * tmp;
      saved = s * tmp;
    }
    b[j] = saved;
  }
  return b;
}

/// Polynomial curve in cylinder coordinates over [0, T], parameterized by
/// s = t / T in the Bernstein basis.
struct BernsteinCurve {
  std::vector<Vec4> points;
  double duration = 1.0;

  int degree() const { return static_cast<int>(points.size()) - 1; }

  Vec4 Position(double s) const { return Combine(points, s); }

  // d/dt, from the derivative control points.
  Vec4 Velocity(double s) const {
    if (degree() < 1) return Vec4::Zero();
    return Combine(DerivativePoints(points, duration), s);
  }

  Vec4 Acceleration(double s) const {
    if (degree() < 2) return Vec4::Zero();
    return Combine(DerivativePoints(DerivativePoints(points, duration), duration), s);
  }

  /// n (beta_{k+1} - beta_k) / T.
  std::vector<Vec4> VelocityControlPoints() const { return DerivativePoints(points, duration); }

  static std::vector<Vec4> DerivativePoints(const std::vector<Vec4>& p, double duration) {
    const int n = static_cast<int>(p.size()) - 1;
    std::vector<Vec4> d(std::max(n, 0));
    for (int k = 0; k < n; ++k) d[k] = n * (p[k + 1] - p[k]) / duration;
    return d;
  }

  static Vec4 Combine(const std::vector<Vec4>& p, double s) {
    const std::vector<double> b = BernsteinBasis(static_cast<int>(p.size()) - 1, s);
    Vec4 out = Vec4::Zero();
    for (std::size_t k = 0; k < p.size(); ++k) out += b[k] * p[k];
    return out;
  }
};

}  // namespace digplan
