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

// Cutting-pass planner: waypoints of the bucket tip that trade excavated
// volume against cylinder travel.
//
// The optimizer works on the tip path itself. Waypoints sit on a uniform x
// grid between two free endpoints that stay on the surface; every interior
// waypoint carries a depth below the surface and every waypoint a bucket
// angle. Cylinder via points follow from closed-form inverse kinematics, so
// the travel cost and stroke limits are still expressed in cylinder space.
// The non-smooth min(V_swept, V_cap) is replaced by an epigraph variable.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "digplan/common.hpp"
#include "digplan/model/kinematics.hpp"
#include "digplan/model/params.hpp"
#include "digplan/optim/nlp_solver.hpp"
#include "digplan/terrain/dig_geometry.hpp"
#include "digplan/terrain/ground.hpp"

namespace digplan {

struct Phase2Margins {
  double depth_m = 1e-4;
  double monotone_rad = 1e-5;
  double clearance_rad = 2e-3;
  double body_m = 2e-3;
  double stroke_m = 0.08;
  double spill_rad = 0.05;
  double reach = 1e-4;
};

struct Phase2Problem {
  GroundModel ground;
  double w_travel = 1.0;
  double w_volume = 1.0;
  int segments = 20;  // n2; the path has segments + 1 waypoints
  Mat3 travel_weight = Mat3::Identity();
  BucketCapacityCurve capacity;  // per unit bucket width
  ModelParams model;
  PhysicalLimits limits;
  double min_length_m = 0.3;
  Phase2Margins margins;
  NlpOptions nlp = PlannerNlpOptions();

  void Validate() const {
    ground.Validate("ground");
    capacity.Validate("bucket");
    if (!(w_travel > 0.0)) throw ConfigError("planner.w_travel", "must be positive");
    if (!(w_volume > 0.0)) throw ConfigError("planner.w_volume", "must be positive");
    if (segments < 4) throw ConfigError("planner.phase2_segments", "must be at least 4");
    if (!travel_weight.isApprox(travel_weight.transpose()) ||
        travel_weight.llt().info() != Eigen::Success) {
      throw ConfigError("planner.travel_weight", "must be symmetric positive definite");
    }
    if (!(min_length_m > 0.0)) throw ConfigError("planner.min_length_m", "must be positive");
  }
};

struct Phase2Solution {
  std::vector<Vec3> via_lengths;  // (L_B, L_A, L_K) per waypoint
  TipPath path;                   // recomputed from the via points
  ExcavatedVolume volume;
  Phase2Report report;
  double cost = 0.0;
  double seed_cost = 0.0;
  double travel = 0.0;  // sum of squared W-weighted via point steps
  NlpResult diagnostics;
};

namespace phase2_detail {

// Inverse kinematics that stays defined outside the reachable set: the elbow
// cosine is clamped and its excess reported separately.
struct SoftInverse {
  Vec3 lengths;
  double reach_slack;  // 1 - |elbow cosine|, negative when out of reach
};

inline SoftInverse SoftLengthsForTip(const ModelParams& p, const TipPose& tip) {
  const double lb = p.links[kBoomLink].length_m;
  const double la = p.links[kArmLink].length_m;
  const double lk = p.links[kBucketLink].length_m;
  const Vec2 r = Vec2(tip.x, tip.z) - lk * LinkDirection(tip.theta) - p.boom_pivot_m;
  const double c = (r.squaredNorm() - lb * lb - la * la) / (2.0 * lb * la);
  const double arm = std::acos(std::clamp(c, -1.0 + 1e-12, 1.0 - 1e-12));
  const double boom = DirectionAngle(r.x(), r.y()) -
                      std::atan2(la * std::sin(arm), lb + la * std::cos(arm));
  const Vec3 angles(boom, arm, tip.theta - boom - arm);
  SoftInverse out;
  for (int j = 0; j < 3; ++j) {
    const LinkageParams& lp = p.linkages[j];
    const double half = std::sin(0.5 * (lp.angle_offset_rad + angles[j]));
    const double d = lp.a_m - lp.b_m;
    out.lengths[j] = std::sqrt(d * d + 4.0 * lp.a_m * lp.b_m * half * half);
  }
  out.reach_slack = 1.0 - std::abs(c);
  return out;
}

inline double PathTravel(const std::vector<Vec3>& l, const Mat3& w) {
  double t = 0.0;
  for (std::size_t k = 1; k < l.size(); ++k) {
    const Vec3 d = l[k] - l[k - 1];
    t += d.dot(w * d);
  }
  return t;
}

// Decision vector layout: x0, xn, depths d_1..d_{n-1}, theta_0..theta_n, t.
struct Layout {
  int n;
  int x0() const { return 0; }
  int xn() const { return 1; }
  int depth(int i) const { return 1 + i; }  // i in 1..n-1
  int theta(int i) const { return n + 1 + i; }
  int epigraph() const { return 2 * n + 2; }
  int size() const { return 2 * n + 3; }
};

struct Evaluation {
  TipPath path;
  std::vector<Vec3> lengths;
  std::vector<double> reach;
  double objective = 0.0;
  VecX inequality;
};

class Phase2Nlp {
 public:
  explicit Phase2Nlp(const Phase2Problem& p) : p_(p), lay_{p.segments} {}

  const Layout& layout() const { return lay_; }

  TipPath PathOf(const VecX& v) const {
    const int n = lay_.n;
    TipPath path(n + 1);
    for (int i = 0; i <= n; ++i) {
      const double x = v[lay_.x0()] + (v[lay_.xn()] - v[lay_.x0()]) * i / n;
      const double d = (i == 0 || i == n) ? 0.0 : v[lay_.depth(i)];
      path[i] = {x, p_.ground.Surface(x) - d, v[lay_.theta(i)]};
    }
    return path;
  }

  VecX Encode(const TipPath& path, double t) const {
    VecX v(lay_.size());
    const int n = lay_.n;
    v[lay_.x0()] = path.front().x;
    v[lay_.xn()] = path.back().x;
    for (int i = 1; i < n; ++i) v[lay_.depth(i)] = p_.ground.Surface(path[i].x) - path[i].z;
    for (int i = 0; i <= n; ++i) v[lay_.theta(i)] = path[i].theta;
    v[lay_.epigraph()] = t;
    return v;
  }

  const Evaluation& Eval(const VecX& v) const {
    if (cache_ && cached_v_.size() == v.size() && cached_v_ == v) return *cache_;
    auto e = std::make_unique<Evaluation>();
    const int n = lay_.n;
    const Phase2Margins& m = p_.margins;
    const PhysicalLimits& lim = p_.limits;
    const BucketGeometry& b = p_.model.bucket;
    e->path = PathOf(v);
    e->lengths.resize(n + 1);
    e->reach.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
      const SoftInverse s = SoftLengthsForTip(p_.model, e->path[i]);
      e->lengths[i] = s.lengths;
      e->reach[i] = s.reach_slack;
    }
    const double t = v[lay_.epigraph()];
    e->objective = p_.w_travel * PathTravel(e->lengths, p_.travel_weight) - p_.w_volume * t;

    std::vector<double> c;
    c.reserve(12 * (n + 1));
    const double x0 = v[lay_.x0()], xn = v[lay_.xn()];
    c.push_back(x0 - xn - p_.min_length_m);
    for (int i = 1; i < n; ++i) {
      const double gap = p_.ground.Surface(e->path[i].x) - p_.ground.Target(e->path[i].x);
      c.push_back(std::max(gap - m.depth_m, 0.0) - v[lay_.depth(i)]);
    }
    for (int i = 0; i < n; ++i) {
      c.push_back(v[lay_.theta(i + 1)] - v[lay_.theta(i)] - m.monotone_rad);
    }
    for (int i = 1; i <= n; ++i) {
      c.push_back(ClearanceAngle(e->path, i, b.plate_angle_offset_rad) - m.clearance_rad);
    }
    for (int i = 0; i <= n; ++i) {
      c.push_back(BodyAbovePath(e->path, i, p_.ground, b, p_.model.tip_to_pin_m()) - m.body_m);
    }
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j < 3; ++j) {
        c.push_back(e->lengths[i][j] - lim.length_lower[j] - m.stroke_m);
        c.push_back(lim.length_upper[j] - e->lengths[i][j] - m.stroke_m);
      }
      c.push_back(e->reach[i] - m.reach);
    }
    // Epigraph of min(V_swept, V_cap).
    double weighted = e->path.front().z + e->path.back().z;
    for (int i = 1; i < n; ++i) weighted += 2.0 * e->path[i].z;
    const double swept = PolyIntegral(p_.ground.surface, xn, x0) - weighted / (2.0 * n) * (x0 - xn);
    c.push_back(swept - t);
    c.push_back(BucketCapacity(std::min(v[lay_.theta(n)], kPi - 1e-9), p_.capacity) - t);
    e->inequality = Eigen::Map<VecX>(c.data(), static_cast<Eigen::Index>(c.size()));

    cached_v_ = v;
    cache_ = std::move(e);
    return *cache_;
  }

  // Cost with the true min(V_swept, V_cap), independent of the epigraph.
  double TrueCost(const VecX& v) const {
    const Evaluation& e = Eval(v);
    const ExcavatedVolume vol = ComputeExcavatedVolume(e.path, p_.ground, p_.capacity);
    return p_.w_travel * PathTravel(e.lengths, p_.travel_weight) - p_.w_volume * vol.value;
  }

  // Strict acceptance: the validator passes and the strokes are in range.
  bool Acceptable(const VecX& v) const {
    const Evaluation& e = Eval(v);
    if (!(e.path.back().x < e.path.front().x)) return false;
    for (int i = 0; i <= lay_.n; ++i) {
      if (e.reach[i] <= 0.0) return false;
      if ((e.lengths[i].array() < p_.limits.length_lower.array()).any()) return false;
      if ((e.lengths[i].array() > p_.limits.length_upper.array()).any()) return false;
    }
    return ValidatePhase2(e.path, p_.ground, p_.model.bucket, p_.model.tip_to_pin_m())
        .AllPassed();
  }

  double EpigraphTarget(const VecX& v) const {
    const Evaluation& e = Eval(v);
    return ComputeExcavatedVolume(e.path, p_.ground, p_.capacity).value;
  }

  NlpProblem Problem() const {
    NlpProblem prob;
    prob.objective = [this](const VecX& v) { return Eval(v).objective; };
    prob.inequality = [this](const VecX& v) { return Eval(v).inequality; };
    const int n = lay_.n;
    prob.lower = VecX::Constant(lay_.size(), -std::numeric_limits<double>::infinity());
    prob.upper = VecX::Constant(lay_.size(), std::numeric_limits<double>::infinity());
    prob.lower[lay_.x0()] = prob.lower[lay_.xn()] = p_.ground.x_min;
    prob.upper[lay_.x0()] = prob.upper[lay_.xn()] = p_.ground.x_max;
    for (int i = 1; i < n; ++i) prob.lower[lay_.depth(i)] = 0.0;
    for (int i = 0; i <= n; ++i) {
      prob.lower[lay_.theta(i)] = 0.05;
      prob.upper[lay_.theta(i)] = kPi - p_.margins.spill_rad;
    }
    prob.lower[lay_.epigraph()] = 0.0;
    return prob;
  }

 private:
  const Phase2Problem& p_;
  Layout lay_;
  mutable VecX cached_v_;
  mutable std::unique_ptr<Evaluation> cache_;
};

// Circular arc between two surface points whose sagitta is the given depth,
// measured below the surface.
inline TipPath ArcPath(const GroundModel& g, double x0, double xn, double depth, int n) {
  TipPath path(n + 1);
  const double half = 0.5 * (x0 - xn);
  const double mid = 0.5 * (x0 + xn);
  const double radius = depth > 0.0 ? (half * half + depth * depth) / (2.0 * depth) : 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = x0 + (xn - x0) * i / n;
    double d = 0.0;
    if (depth > 0.0 && i > 0 && i < n) {
      d = std::sqrt(std::max(0.0, radius * radius - (x - mid) * (x - mid))) - (radius - depth);
    }
    path[i] = {x, g.Surface(x) - d, 0.0};
  }
  return path;
}

// Travel angles unwrapped around pi, so the curl of a scoop reads as an
// increasing sequence.
inline std::vector<double> UnwrappedTravelAngles(const TipPath& path) {
  std::vector<double> gamma(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    double a = TravelAngle(path, static_cast<int>(i));
    if (a < 0.0) a += 2.0 * kPi;
    gamma[i] = a;
  }
  return gamma;
}

}  // namespace phase2_detail

/// Constraint-feasible starting path: a circular arc as deep as half the
/// bucket or the surface-to-target gap, whichever is shallower, with the
/// bucket angle rising linearly or tracking the travel direction.
inline VecX Phase2Seed(const Phase2Problem& p, const phase2_detail::Phase2Nlp& nlp) {
  using namespace phase2_detail;
  const int n = p.segments;
  const double span = p.ground.x_max - p.ground.x_min;
  const double angle_offset = p.model.bucket.plate_angle_offset_rad;
  for (double length : {3.0, 2.5, 2.0, 1.5, 1.0, 0.6, p.min_length_m}) {
    if (length < p.min_length_m || length > span) continue;
    for (double x0 = p.ground.x_max; x0 - length >= p.ground.x_min - 1e-12; x0 -= 0.25) {
      const double xn = x0 - length;
      double gap = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= 200; ++k) {
        const double x = xn + length * k / 200.0;
        gap = std::min(gap, p.ground.Surface(x) - p.ground.Target(x));
      }
      const double depth =
          std::max(0.0, std::min(0.5 * p.model.tip_to_pin_m(), gap - 2.0 * p.margins.depth_m));
      TipPath path = ArcPath(p.ground, x0, xn, depth, n);
      const std::vector<double> gamma = UnwrappedTravelAngles(path);
      for (double clearance : {0.15, 0.3, 0.5, 0.8}) {
        for (bool linear : {true, false}) {
          // A straight pass has constant travel angle; the small forced
          // rise keeps theta strictly increasing.
          const double rise = 2.0 * p.margins.monotone_rad;
          const double first = gamma[0] + angle_offset - clearance;
          const double last = std::max(gamma[n] + angle_offset - clearance, first + n * rise);
          for (int i = 0; i <= n; ++i) {
            const double follow = gamma[i] + angle_offset - clearance + i * rise;
            path[i].theta = linear ? first + (last - first) * i / n : follow;
          }
          if (path[n].theta >= kPi - p.margins.spill_rad) continue;
          const double v = ComputeExcavatedVolume(path, p.ground, p.capacity).value;
          const VecX seed = nlp.Encode(path, v);
          if (nlp.Acceptable(seed) && nlp.Eval(seed).inequality.minCoeff() >= -1e-12) return seed;
        }
      }
    }
  }
  throw InfeasibleError("no feasible cutting-pass seed inside the region of interest");
}

inline Phase2Solution PlanPhase2(const Phase2Problem& problem) {
  using namespace phase2_detail;
  problem.Validate();
  Phase2Nlp nlp(problem);
  const VecX seed = Phase2Seed(problem, nlp);

  NlpOptions opt = problem.nlp;
  opt.accept = [&nlp](const VecX& v) { return nlp.Acceptable(v); };
  NlpResult r = SolveNlp(nlp.Problem(), seed, opt);

  Phase2Solution sol;
  sol.seed_cost = nlp.TrueCost(seed);
  VecX best = r.feasible ? r.x : seed;
  if (nlp.TrueCost(best) > sol.seed_cost) best = seed;
  best[nlp.layout().epigraph()] = nlp.EpigraphTarget(best);
  sol.diagnostics = std::move(r);
  sol.diagnostics.x = best;

  const Evaluation& e = nlp.Eval(best);
  sol.via_lengths = e.lengths;
  const Kinematics kin(problem.model);
  sol.path.resize(e.lengths.size());
  for (std::size_t i = 0; i < e.lengths.size(); ++i) sol.path[i] = kin.TipFromLengths(e.lengths[i]);
  sol.volume = ComputeExcavatedVolume(sol.path, problem.ground, problem.capacity);
  sol.report = ValidatePhase2(sol.path, problem.ground, problem.model.bucket,
                              problem.model.tip_to_pin_m());
  sol.travel = PathTravel(sol.via_lengths, problem.travel_weight);
  sol.cost = problem.w_travel * sol.travel - problem.w_volume * sol.volume.value;
  return sol;
}

}  // namespace digplan
