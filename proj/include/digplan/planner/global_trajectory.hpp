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
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "digplan/common.hpp"
#include "digplan/model/constraints.hpp"
#include "digplan/model/kinematics.hpp"
#include "digplan/model/params.hpp"
#include "digplan/planner/bernstein.hpp"

namespace digplan {

/// Piecewise-linear timing of the cutting pass in cylinder coordinates.
struct Phase2Timing {
  std::vector<Vec4> points;   // via points after merging repeats
  std::vector<double> times;  // knot times, times[0] = 0

  double duration() const { return times.empty() ? 0.0 : times.back(); }
  int segments() const { return std::max(0, static_cast<int>(points.size()) - 1); }

  // Right-continuous rate: a knot takes the rate of the segment it starts,
  // the final knot that of the last segment.
  CylinderState At(double t) const {
    if (points.empty()) return {Vec4::Zero(), Vec4::Zero()};
    if (segments() == 0) return {points.front(), Vec4::Zero()};
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    int k = static_cast<int>(it - times.begin()) - 1;
    k = std::clamp(k, 0, segments() - 1);
    const double span = times[k + 1] - times[k];
    const Vec4 rate = (points[k + 1] - points[k]) / span;
    const double tau = std::clamp(t - times[k], 0.0, span);
    return {points[k] + rate * tau, rate};
  }
};

/// Segment k lasts long enough that no cylinder exceeds eta times its rate
/// limit and no pump exceeds eta times its flow bound. Zero-length segments
/// are merged away.
inline Phase2Timing TimeParameterizePhase2(const std::vector<Vec4>& via,
                                           const PhysicalLimits& lim, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("planner.utilization", "must lie in (0, 1]");
  Phase2Timing out;
  if (via.empty()) return out;
  out.points.push_back(via.front());
  out.times.push_back(0.0);
  for (std::size_t k = 1; k < via.size(); ++k) {
    const Vec4 d = via[k] - out.points.back();
    double span = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double bound = d[j] >= 0.0 ? lim.velocity_upper[j] : -lim.velocity_lower[j];
      span = std::max(span, std::abs(d[j]) / (eta * bound));
    }
    for (const PumpParams& pump : lim.pumps) {
      span = std::max(span, PumpFlow(pump, d) / (eta * pump.flow_max_m3ps));
    }
    if (span <= 0.0) continue;
    out.points.push_back(via[k]);
    out.times.push_back(out.times.back() + span);
  }
  if (out.points.size() == 1) {
    out.times.clear();
    out.points.clear();
  }
  return out;
}

class ContinuityError : public std::runtime_error {
 public:
  ContinuityError(int junction, int component, double residual)
      : std::runtime_error("junction " + std::to_string(junction) + " component " +
                           std::to_string(component) + " mismatch " +
                           std::to_string(residual)),
        junction_(junction),
        component_(component) {}
  int junction() const { return junction_; }
  int component() const { return component_; }  // 0..3 position, 4..7 rate

 private:
  int junction_, component_;
};

/// Phase-tagged reference sampled on a fixed grid.
struct GlobalTrajectory {
  double dt = 0.02;
  std::vector<double> t;
  std::vector<CylinderState> x;
  std::vector<int> phase;
  std::array<double, 2> boundaries{};  // start times of phases 2 and 3
  double duration = 0.0;
  std::array<double, 2> junction_residual{};

  int size() const { return static_cast<int>(t.size()); }
  // Sample k, holding the last one beyond the end.
  const CylinderState& Reference(int k) const { return x[std::clamp(k, 0, size() - 1)]; }
};

struct PhasePieces {
  BernsteinCurve approach;
  Phase2Timing cut;
  BernsteinCurve carry;

  double Duration() const { return approach.duration + cut.duration() + carry.duration; }

  // State and phase at time t, clamped to [0, Duration()].
  CylinderState At(double time, int* phase = nullptr) const {
    const double t1 = approach.duration, t2 = t1 + cut.duration();
    int ph;
    CylinderState s;
    if (time < t1) {
      ph = 1;
      const double u = std::max(time, 0.0) / approach.duration;
      s = {approach.Position(u), approach.Velocity(u)};
    } else if (time < t2) {
      ph = 2;
      s = cut.At(time - t1);
    } else {
      ph = 3;
      const double u = std::min((time - t2) / carry.duration, 1.0);
      s = {carry.Position(u), carry.Velocity(u)};
    }
    if (phase) *phase = ph;
    return s;
  }
};

inline GlobalTrajectory AssembleGlobal(const PhasePieces& pieces, double dt,
                                       double tolerance = 1e-9) {
  GlobalTrajectory g;
  g.dt = dt;
  const double t1 = pieces.approach.duration;
  const double t2 = t1 + pieces.cut.duration();
  g.boundaries = {t1, t2};
  g.duration = pieces.Duration();

  // Junction residuals: end of the earlier phase against start of the next.
  const auto check = [&](int junction, const CylinderState& a, const CylinderState& b) {
    double worst = 0.0;
    for (int c = 0; c < 8; ++c) {
      const double r = c < 4 ? std::abs(a.q[c] - b.q[c]) : std::abs(a.qd[c - 4] - b.qd[c - 4]);
      if (r > tolerance) throw ContinuityError(junction, c, r);
      worst = std::max(worst, r);
    }
    g.junction_residual[junction - 1] = worst;
  };
  const CylinderState approach_end{pieces.approach.Position(1.0), pieces.approach.Velocity(1.0)};
  const CylinderState carry_start{pieces.carry.Position(0.0), pieces.carry.Velocity(0.0)};
  CylinderState cut_start = approach_end, cut_end = carry_start;
  if (!pieces.cut.points.empty()) {
    cut_start = pieces.cut.At(0.0);
    cut_end = pieces.cut.At(pieces.cut.duration());
  }
  check(1, approach_end, cut_start);
  check(2, cut_end, carry_start);

  const int count = static_cast<int>(std::ceil(g.duration / dt - 1e-9)) + 1;
  g.t.resize(count);
  g.x.resize(count);
  g.phase.resize(count);
  for (int k = 0; k < count; ++k) {
    g.t[k] = k * dt;
    g.x[k] = pieces.At(g.t[k], &g.phase[k]);
  }
  return g;
}

inline void WriteTrajectoryCsv(std::ostream& os, const GlobalTrajectory& g) {
  os << "t,psi_U,L_B,L_A,L_K,dpsi_U,dL_B,dL_A,dL_K,phase\n";
  char buf[64];
  for (int k = 0; k < g.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.3f", g.t[k]);
    os << buf;
    for (int j = 0; j < 4; ++j) {
      std::snprintf(buf, sizeof(buf), ",%.12g", g.x[k].q[j]);
      os << buf;
    }
    for (int j = 0; j < 4; ++j) {
      std::snprintf(buf, sizeof(buf), ",%.12g", g.x[k].qd[j]);
      os << buf;
    }
    os << ',' << g.phase[k] << '\n';
  }
}

}  // namespace digplan
