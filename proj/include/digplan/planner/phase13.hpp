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

// Free-space approach (phase 1) and carry (phase 3) motions as Bernstein
// curves that minimize the integrated squared actuator effort.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "digplan/common.hpp"
#include "digplan/model/dynamics.hpp"
#include "digplan/model/params.hpp"
#include "digplan/optim/nlp_solver.hpp"
#include "digplan/planner/bernstein.hpp"

namespace digplan {

struct BoundaryStates {
  Vec4 q_start = Vec4::Zero();
  Vec4 qd_start = Vec4::Zero();
  Vec4 q_end = Vec4::Zero();
  Vec4 qd_end = Vec4::Zero();
};

struct Phase13Problem {
  BoundaryStates boundary;
  ModelParams model;
  PhysicalLimits limits;
  int phase = 1;
  // Lower bound on the bucket angle along a carry; ignored for phase 1.
  double theta_min = 0.0;
  int degree = 8;
  int quadrature_nodes = 50;
  double duration_min_s = 1.0;
  double duration_max_s = 30.0;
  // Diagonal effort weight; zero entries are replaced by 1 / max|u|^2.
  Vec4 effort_weight = Vec4::Zero();
  NlpOptions nlp = PlannerNlpOptions();
};

struct Phase13Solution {
  BernsteinCurve curve;
  double cost = 0.0;
  double seed_cost = 0.0;
  // Worst bucket-angle excursion outside [theta_min, pi] on 10^3 samples of a
  // carry; the control-point bound does not guarantee it.
  double theta_sample_violation = 0.0;
  NlpResult diagnostics;
};

namespace phase13_detail {

inline double BucketAngle(const Kinematics& kin, const Vec4& q_l) {
  const Vec4 q = kin.CylinderToJoint(q_l);
  return q[1] + q[2] + q[3];
}

class Phase13Nlp {
 public:
  explicit Phase13Nlp(const Phase13Problem& p) : p_(p), dyn_(p.model), n_(p.degree) {
    const int m = p.quadrature_nodes;
    for (int i = 0; i <= m; ++i) {
      const double s = static_cast<double>(i) / m;
      b0_.push_back(BernsteinBasis(n_, s));
      b1_.push_back(BernsteinBasis(n_ - 1, s));
      b2_.push_back(BernsteinBasis(n_ - 2, s));
      weights_.push_back((i == 0 || i == m) ? 0.5 / m : 1.0 / m);
    }
    weight_ = p.effort_weight;
    for (int j = 0; j < 4; ++j) {
      if (weight_[j] <= 0.0) {
        const double u = std::max(std::abs(p.limits.u_lower[j]), std::abs(p.limits.u_upper[j]));
        weight_[j] = 1.0 / (u * u);
      }
    }
  }

  int free_points() const { return n_ - 3; }
  int size() const { return 4 * free_points() + 1; }
  double Duration(const VecX& v) const { return v[size() - 1]; }

  std::vector<Vec4> Points(const VecX& v) const {
    const BoundaryStates& b = p_.boundary;
    const double t = Duration(v);
    std::vector<Vec4> pts(n_ + 1);
    pts[0] = b.q_start;
    pts[1] = b.q_start + t * b.qd_start / n_;
    for (int k = 0; k < free_points(); ++k) pts[k + 2] = v.segment<4>(4 * k);
    pts[n_ - 1] = b.q_end - t * b.qd_end / n_;
    pts[n_] = b.q_end;
    return pts;
  }

  VecX Encode(const std::vector<Vec4>& pts, double duration) const {
    VecX v(size());
    for (int k = 0; k < free_points(); ++k) v.segment<4>(4 * k) = pts[k + 2];
    v[size() - 1] = duration;
    return v;
  }

  double Effort(const VecX& v) const {
    const std::vector<Vec4> pts = Points(v);
    const double t = Duration(v);
    const std::vector<Vec4> d1 = BernsteinCurve::DerivativePoints(pts, t);
    const std::vector<Vec4> d2 = BernsteinCurve::DerivativePoints(d1, t);
    double cost = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      CylinderState x{Vec4::Zero(), Vec4::Zero()};
      Vec4 qdd = Vec4::Zero();
      for (int k = 0; k <= n_; ++k) x.q += b0_[i][k] * pts[k];
      for (int k = 0; k < n_; ++k) x.qd += b1_[i][k] * d1[k];
      for (int k = 0; k < n_ - 1; ++k) qdd += b2_[i][k] * d2[k];
      const ControlInput u = dyn_.InverseCylinder(x, qdd);
      cost += weights_[i] * 0.5 * u.dot(weight_.cwiseProduct(u));
    }
    return cost * t;
  }

  // Chain rule through the quadrature nodes. The input is affine in qdd_L
  // with slope M_L and quadratic in qd_L, so central differences in qd_L are
  // exact; only the position partials carry truncation error.
  VecX EffortGradient(const VecX& v) const {
    const std::vector<Vec4> pts = Points(v);
    const double t = Duration(v);
    const std::vector<Vec4> d1 = BernsteinCurve::DerivativePoints(pts, t);
    const std::vector<Vec4> d2 = BernsteinCurve::DerivativePoints(d1, t);
    std::vector<Vec4> g_pts(n_ + 1, Vec4::Zero());
    double sum = 0.0, g_t = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      CylinderState x{Vec4::Zero(), Vec4::Zero()};
      Vec4 qdd = Vec4::Zero();
      for (int k = 0; k <= n_; ++k) x.q += b0_[i][k] * pts[k];
      for (int k = 0; k < n_; ++k) x.qd += b1_[i][k] * d1[k];
      for (int k = 0; k < n_ - 1; ++k) qdd += b2_[i][k] * d2[k];
      const CylinderDynamics d = dyn_.Cylinder(x);
      const ControlInput u = d.M * qdd + d.h;
      const Vec4 wu = weight_.cwiseProduct(u);
      sum += weights_[i] * 0.5 * u.dot(wu);

      Vec4 g_q, g_qd;
      for (int j = 0; j < 4; ++j) {
        const double hq = 1e-6 * std::max(1.0, std::abs(x.q[j]));
        CylinderState xp = x, xm = x;
        xp.q[j] += hq;
        xm.q[j] -= hq;
        g_q[j] = wu.dot(dyn_.InverseCylinder(xp, qdd) - dyn_.InverseCylinder(xm, qdd)) / (2.0 * hq);
        xp = x;
        xm = x;
        xp.qd[j] += 1.0;
        xm.qd[j] -= 1.0;
        g_qd[j] = wu.dot(dyn_.Cylinder(xp).h - dyn_.Cylinder(xm).h) / 2.0;
      }
      const Vec4 g_qdd = d.M.transpose() * wu;

      const double w = weights_[i] * t;
      for (int k = 0; k <= n_; ++k) g_pts[k] += w * b0_[i][k] * g_q;
      for (int k = 0; k < n_; ++k) {
        const Vec4 gk = w * b1_[i][k] * n_ / t * g_qd;
        g_pts[k + 1] += gk;
        g_pts[k] -= gk;
      }
      const double c2 = static_cast<double>(n_) * (n_ - 1) / (t * t);
      for (int k = 0; k < n_ - 1; ++k) {
        const Vec4 gk = w * b2_[i][k] * c2 * g_qdd;
        g_pts[k + 2] += gk;
        g_pts[k + 1] -= 2.0 * gk;
        g_pts[k] += gk;
      }
      // Holding the control points, qd scales as 1/T and qdd as 1/T^2.
      g_t -= w * (g_qd.dot(x.qd) + 2.0 * g_qdd.dot(qdd)) / t;
    }
    g_t += sum;
    const BoundaryStates& b = p_.boundary;
    g_t += g_pts[1].dot(b.qd_start) / n_ - g_pts[n_ - 1].dot(b.qd_end) / n_;

    VecX g(size());
    for (int k = 0; k < free_points(); ++k) g.segment<4>(4 * k) = g_pts[k + 2];
    g[size() - 1] = g_t;
    return g;
  }

  VecX Inequality(const VecX& v) const {
    const std::vector<Vec4> pts = Points(v);
    const PhysicalLimits& lim = p_.limits;
    const Vec4 lo = lim.position_lower(), hi = lim.position_upper();
    std::vector<double> c;
    for (int k : {1, n_ - 1}) {
      for (int j = 0; j < 4; ++j) {
        c.push_back(pts[k][j] - lo[j]);
        c.push_back(hi[j] - pts[k][j]);
      }
    }
    for (const Vec4& d : BernsteinCurve::DerivativePoints(pts, Duration(v))) {
      for (int j = 0; j < 4; ++j) {
        c.push_back(d[j] - lim.velocity_lower[j]);
        c.push_back(lim.velocity_upper[j] - d[j]);
      }
    }
    if (p_.phase == 3) {
      for (int k = 1; k < n_; ++k) {
        const double th = BucketAngle(dyn_.kinematics(), pts[k]);
        c.push_back(th - p_.theta_min);
        c.push_back(kPi - th);
      }
    }
    return Eigen::Map<VecX>(c.data(), static_cast<Eigen::Index>(c.size()));
  }

  NlpProblem Problem() const {
    NlpProblem prob;
    prob.objective = [this](const VecX& v) { return Effort(v); };
    prob.objective_gradient = [this](const VecX& v) { return EffortGradient(v); };
    prob.inequality = [this](const VecX& v) { return Inequality(v); };
    prob.lower.resize(size());
    prob.upper.resize(size());
    for (int k = 0; k < free_points(); ++k) {
      prob.lower.segment<4>(4 * k) = p_.limits.position_lower();
      prob.upper.segment<4>(4 * k) = p_.limits.position_upper();
    }
    prob.lower[size() - 1] = p_.duration_min_s;
    prob.upper[size() - 1] = p_.duration_max_s;
    return prob;
  }

  const Dynamics& dynamics() const { return dyn_; }

 private:
  const Phase13Problem& p_;
  Dynamics dyn_;
  int n_;
  std::vector<std::vector<double>> b0_, b1_, b2_;
  std::vector<double> weights_;
  Vec4 weight_;
};

}  // namespace phase13_detail

inline void CheckBoundary(const Phase13Problem& p) {
  const PhysicalLimits& lim = p.limits;
  const BoundaryStates& b = p.boundary;
  const auto inside = [](const Vec4& v, const Vec4& lo, const Vec4& hi) {
    return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all();
  };
  const std::string tag = "phase " + std::to_string(p.phase) + " ";
  if (!inside(b.q_start, lim.position_lower(), lim.position_upper()) ||
      !inside(b.q_end, lim.position_lower(), lim.position_upper())) {
    throw InfeasibleError(tag + "boundary configuration outside the stroke box");
  }
  if (!inside(b.qd_start, lim.velocity_lower, lim.velocity_upper) ||
      !inside(b.qd_end, lim.velocity_lower, lim.velocity_upper)) {
    throw InfeasibleError(tag + "boundary rate outside the velocity box");
  }
  if (p.phase == 3) {
    const Kinematics kin(p.model);
    for (const Vec4& q : {b.q_start, b.q_end}) {
      const double th = phase13_detail::BucketAngle(kin, q);
      if (th < p.theta_min - 1e-9 || th >= kPi) {
        throw InfeasibleError(tag + "boundary bucket angle would spill the load");
      }
    }
  }
  if (p.degree < 4) throw ConfigError("planner.bernstein_degree", "must be at least 4");
  if (p.quadrature_nodes < 50) throw ConfigError("planner.quadrature_nodes", "must be at least 50");
  if (!(p.duration_min_s > 0.0 && p.duration_min_s < p.duration_max_s)) {
    throw ConfigError("planner.duration_min_s", "need 0 < min < max");
  }
}

inline Phase13Solution PlanPhase13(const Phase13Problem& problem) {
  using namespace phase13_detail;
  CheckBoundary(problem);
  const Phase13Nlp nlp(problem);
  const int n = problem.degree;

  // Seed: evenly spread interior points, stretched in time until the
  // derivative control points fit the velocity box.
  VecX seed;
  for (double t = problem.duration_min_s;; t *= 1.25) {
    t = std::min(t, problem.duration_max_s);
    std::vector<Vec4> pts(n + 1);
    const Vec4 first = problem.boundary.q_start + t * problem.boundary.qd_start / n;
    const Vec4 last = problem.boundary.q_end - t * problem.boundary.qd_end / n;
    for (int k = 1; k < n; ++k) pts[k] = first + (last - first) * (k - 1) / (n - 2);
    seed = nlp.Encode(pts, t);
    if (nlp.Inequality(seed).minCoeff() >= 0.0 || t >= problem.duration_max_s) break;
  }
  for (int k = 0; k < nlp.free_points(); ++k) {
    seed.segment<4>(4 * k) = seed.segment<4>(4 * k)
                                 .cwiseMax(problem.limits.position_lower())
                                 .cwiseMin(problem.limits.position_upper());
  }

  NlpResult r = SolveNlp(nlp.Problem(), seed, problem.nlp);
  Phase13Solution sol;
  sol.seed_cost = nlp.Effort(seed);
  const VecX best = r.feasible ? r.x : seed;
  sol.curve.points = nlp.Points(best);
  sol.curve.duration = nlp.Duration(best);
  sol.cost = nlp.Effort(best);
  sol.diagnostics = std::move(r);
  sol.diagnostics.x = best;
  if (problem.phase == 3) {
    const Kinematics& kin = nlp.dynamics().kinematics();
    for (int i = 0; i <= 1000; ++i) {
      const double th = BucketAngle(kin, sol.curve.Position(i / 1000.0));
      sol.theta_sample_violation =
          std::max({sol.theta_sample_violation, problem.theta_min - th, th - kPi});
    }
  }
  return sol;
}

}  // namespace digplan
