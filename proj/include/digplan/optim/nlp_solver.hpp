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

// Smooth nonlinear programming:
//
//   minimize f(x)  subject to  c(x) >= 0,  h(x) = 0,  lower <= x <= upper.
//
// A PHR augmented-Lagrangian outer loop handles c and h; the box is kept by
// projection inside a limited-memory BFGS inner loop.

#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stop_token>
#include <string>

#include "digplan/common.hpp"

namespace digplan {

struct NlpProblem {
  std::function<double(const VecX&)> objective;
  std::function<VecX(const VecX&)> inequality;  // optional, >= 0 is feasible
  std::function<VecX(const VecX&)> equality;    // optional
  // Optional analytic gradient of the objective. Constraint Jacobians always
  // come from central differences.
  std::function<VecX(const VecX&)> objective_gradient;
  VecX lower;  // empty means unbounded
  VecX upper;
};

struct NlpProgress {
  int outer_iteration = 0;
  double objective = 0.0;
  double max_violation = 0.0;
  double kkt_residual = 0.0;
};

struct NlpOptions {
  int max_outer_iterations = 40;
  int max_inner_iterations = 300;
  double kkt_tolerance = 1e-6;
  double feasibility_tolerance = 1e-6;
  double fd_relative_step = 1e-6;
  double penalty_initial = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e10;
  int lbfgs_memory = 10;
  // Stop once two consecutive feasible outer iterations change the objective
  // by less than this (relative to max(1, |f|)).
  double stall_tolerance = 1e-9;
  // Decides which iterates count as feasible when tracking the best one;
  // defaults to max violation <= feasibility_tolerance.
  std::function<bool(const VecX&)> accept;
  std::function<void(const NlpProgress&)> progress;
  std::stop_token stop;
};

// Planner default: stop once the objective stops moving at 1e-7.
inline NlpOptions PlannerNlpOptions() {
  NlpOptions o;
  o.stall_tolerance = 1e-7;
  return o;
}

enum class NlpStatus { kConverged, kStalled, kIterationCap, kLineSearchFailure, kCancelled };

inline const char* ToString(NlpStatus s) {
  switch (s) {
    case NlpStatus::kConverged: return "converged";
    case NlpStatus::kStalled: return "stalled";
    case NlpStatus::kIterationCap: return "iteration_cap";
    case NlpStatus::kLineSearchFailure: return "line_search_failure";
    case NlpStatus::kCancelled: return "cancelled";
  }
  return "unknown";
}

struct NlpResult {
  VecX x;  // best feasible iterate, or the last iterate if none was feasible
  double objective = 0.0;
  double max_violation = 0.0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  bool feasible = false;
  NlpStatus status = NlpStatus::kIterationCap;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int evaluations = 0;
  VecX inequality_multipliers;
  VecX equality_multipliers;
};

namespace nlp_detail {

inline VecX Evaluate(const std::function<VecX(const VecX&)>& fn, const VecX& x) {
  return fn ? fn(x) : VecX();
}

inline double MaxViolation(const VecX& c, const VecX& h) {
  double v = 0.0;
  if (c.size() > 0) v = std::max(v, -c.minCoeff());
  if (h.size() > 0) v = std::max(v, h.cwiseAbs().maxCoeff());
  return v;
}

}  // namespace nlp_detail

class NlpSolver {
 public:
  NlpSolver(NlpProblem problem, NlpOptions options)
      : p_(std::move(problem)), o_(std::move(options)) {}

  NlpResult Solve(const VecX& seed) {
    const int n = static_cast<int>(seed.size());
    lower_ = p_.lower.size() == n ? p_.lower : VecX::Constant(n, -kInf);
    upper_ = p_.upper.size() == n ? p_.upper : VecX::Constant(n, kInf);
    NlpResult res;
    VecX x = Project(seed);
    VecX c = nlp_detail::Evaluate(p_.inequality, x);
    VecX h = nlp_detail::Evaluate(p_.equality, x);
    lambda_ = VecX::Zero(c.size());
    nu_ = VecX::Zero(h.size());
    mu_ = o_.penalty_initial;

    double best = kInf;
    const auto consider = [&](const VecX& xc) {
      const VecX cc = nlp_detail::Evaluate(p_.inequality, xc);
      const VecX hc = nlp_detail::Evaluate(p_.equality, xc);
      const double viol = nlp_detail::MaxViolation(cc, hc);
      const bool ok = o_.accept ? o_.accept(xc) : viol <= o_.feasibility_tolerance;
      const double f = p_.objective(xc);
      if (ok && f < best) {
        best = f;
        res.x = xc;
        res.objective = f;
        res.max_violation = viol;
        res.feasible = true;
      }
      return viol;
    };
    consider(x);

    double inner_tol = 1e-2;
    double prev_viol = kInf;
    double prev_f = kInf;
    int stalled = 0;
    for (int outer = 0; outer < o_.max_outer_iterations; ++outer) {
      res.outer_iterations = outer + 1;
      if (o_.stop.stop_requested()) {
        res.status = NlpStatus::kCancelled;
        break;
      }
      const InnerOutcome inner = MinimizeInner(x, inner_tol, &res);
      x = inner.x;
      c = nlp_detail::Evaluate(p_.inequality, x);
      h = nlp_detail::Evaluate(p_.equality, x);
      const double viol = consider(x);

      // First-order multiplier updates.
      for (int i = 0; i < c.size(); ++i) lambda_[i] = std::max(0.0, lambda_[i] - mu_ * c[i]);
      nu_ += mu_ * h;

      double compl_res = 0.0;
      for (int i = 0; i < c.size(); ++i) {
        compl_res = std::max(compl_res, std::abs(std::min(lambda_[i], c[i])));
      }
      res.kkt_residual = std::max({inner.projected_gradient, viol, compl_res});
      if (o_.progress) o_.progress({outer, p_.objective(x), viol, res.kkt_residual});
      if (inner.line_search_failed && viol <= o_.feasibility_tolerance &&
          inner.projected_gradient > 10.0 * o_.kkt_tolerance) {
        res.status = NlpStatus::kLineSearchFailure;
      }
      if (res.kkt_residual < o_.kkt_tolerance) {
        res.status = NlpStatus::kConverged;
        break;
      }
      const double f = p_.objective(x);
      const bool flat = std::abs(f - prev_f) <= o_.stall_tolerance * std::max(1.0, std::abs(f));
      stalled = (flat && viol <= o_.feasibility_tolerance) ? stalled + 1 : 0;
      prev_f = f;
      if (stalled >= 2) {
        res.status = NlpStatus::kStalled;
        break;
      }
      if (viol > 0.25 * prev_viol && viol > o_.feasibility_tolerance) {
        mu_ = std::min(mu_ * o_.penalty_growth, o_.penalty_max);
      }
      prev_viol = viol;
      inner_tol = std::max(0.1 * inner_tol, 0.1 * o_.kkt_tolerance);
    }
    if (res.status == NlpStatus::kLineSearchFailure && res.kkt_residual < o_.kkt_tolerance) {
      res.status = NlpStatus::kConverged;
    }
    if (!res.feasible) {
      res.x = x;
      res.objective = p_.objective(x);
      res.max_violation = nlp_detail::MaxViolation(c, h);
    }
    res.inequality_multipliers = lambda_;
    res.equality_multipliers = nu_;
    res.evaluations = evaluations_;
    return res;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  struct InnerOutcome {
    VecX x;
    double projected_gradient = kInf;
    bool line_search_failed = false;
  };

  VecX Project(const VecX& x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

  // Evaluation errors (e.g. a degenerate geometry mid line search) read as
  // an infinitely bad point.
  double Merit(const VecX& x) {
    try {
      return MeritUnguarded(x);
    } catch (const std::exception&) {
      return kInf;
    }
  }

  double MeritUnguarded(const VecX& x) {
    ++evaluations_;
    return p_.objective(x) + Penalty(x);
  }

  double Penalty(const VecX& x) const {
    double m = 0.0;
    if (p_.inequality) {
      const VecX c = p_.inequality(x);
      for (int i = 0; i < c.size(); ++i) {
        const double s = std::max(0.0, lambda_[i] - mu_ * c[i]);
        m += (s * s - lambda_[i] * lambda_[i]) / (2.0 * mu_);
      }
    }
    if (p_.equality) {
      const VecX h = p_.equality(x);
      m += nu_.dot(h) + 0.5 * mu_ * h.squaredNorm();
    }
    return m;
  }

  VecX MeritGradient(const VecX& x) {
    const int n = static_cast<int>(x.size());
    VecX g(n);
    // With an analytic objective gradient only the penalty terms are
    // differenced.
    const bool analytic = static_cast<bool>(p_.objective_gradient);
    const auto part = [&](const VecX& xs) {
      if (!analytic) return Merit(xs);
      try {
        return Penalty(xs);
      } catch (const std::exception&) {
        return kInf;
      }
    };
    for (int k = 0; k < n; ++k) {
      const double step = o_.fd_relative_step * std::max(1.0, std::abs(x[k]));
      VecX xp = x, xm = x;
      xp[k] += step;
      xm[k] -= step;
      g[k] = (part(xp) - part(xm)) / (2.0 * step);
    }
    if (analytic) g += p_.objective_gradient(x);
    return g;
  }

  double ProjectedGradientNorm(const VecX& x, const VecX& g) const {
    return (Project(x - g) - x).cwiseAbs().maxCoeff();
  }

  InnerOutcome MinimizeInner(VecX x, double tol, NlpResult* res) {
    const int n = static_cast<int>(x.size());
    std::deque<VecX> s_hist, y_hist;
    double f = Merit(x);
    VecX g = MeritGradient(x);
    InnerOutcome out;
    std::deque<double> recent;  // merit values of the last few iterates
    for (int it = 0; it < o_.max_inner_iterations; ++it) {
      ++res->inner_iterations;
      out.projected_gradient = ProjectedGradientNorm(x, g);
      if (out.projected_gradient < tol || o_.stop.stop_requested()) break;

      // Variables held at a bound by the gradient are frozen for this step.
      Eigen::ArrayXd free = Eigen::ArrayXd::Ones(n);
      for (int k = 0; k < n; ++k) {
        if ((x[k] <= lower_[k] && g[k] > 0.0) || (x[k] >= upper_[k] && g[k] < 0.0)) free[k] = 0.0;
      }
      VecX q = (g.array() * free).matrix();
      std::vector<double> alpha(s_hist.size());
      for (int j = static_cast<int>(s_hist.size()) - 1; j >= 0; --j) {
        const double rho = 1.0 / y_hist[j].dot(s_hist[j]);
        alpha[j] = rho * s_hist[j].dot(q);
        q -= alpha[j] * y_hist[j];
      }
      if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      for (std::size_t j = 0; j < s_hist.size(); ++j) {
        const double rho = 1.0 / y_hist[j].dot(s_hist[j]);
        const double beta = rho * y_hist[j].dot(q);
        q += (alpha[j] - beta) * s_hist[j];
      }
      VecX d = -(q.array() * free).matrix();
      if (d.dot(g) >= 0.0) {
        d = -(g.array() * free).matrix();
        s_hist.clear();
        y_hist.clear();
      }
      if (s_hist.empty()) {
        const double dn = d.cwiseAbs().maxCoeff();
        if (dn > 0.0) d *= std::min(1.0, 0.1 / dn);
      }

      // Projected Armijo backtracking.
      double step = 1.0;
      VecX x_new;
      double f_new = f;
      bool ok = false;
      for (int ls = 0; ls < 40; ++ls) {
        x_new = Project(x + step * d);
        f_new = Merit(x_new);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x)) {
          ok = true;
          break;
        }
        step *= 0.5;
      }
      if (!ok) {
        if (!s_hist.empty()) {
          s_hist.clear();
          y_hist.clear();
          continue;
        }
        out.line_search_failed = true;
        break;
      }
      const VecX g_new = MeritGradient(x_new);
      const VecX s = x_new - x, y = g_new - g;
      if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
        s_hist.push_back(s);
        y_hist.push_back(y);
        if (static_cast<int>(s_hist.size()) > o_.lbfgs_memory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
      x = x_new;
      f = f_new;
      g = g_new;
      recent.push_back(f);
      if (recent.size() > 10) {
        recent.pop_front();
        if (recent.front() - f <= 1e-12 * std::max(1.0, std::abs(f))) break;
      }
    }
    out.x = x;
    out.projected_gradient = ProjectedGradientNorm(x, g);
    return out;
  }

  NlpProblem p_;
  NlpOptions o_;
  VecX lower_, upper_, lambda_, nu_;
  double mu_ = 10.0;
  int evaluations_ = 0;
};

inline NlpResult SolveNlp(const NlpProblem& problem, const VecX& seed,
                          const NlpOptions& options = {}) {
  return NlpSolver(problem, options).Solve(seed);
}

}  // namespace digplan
