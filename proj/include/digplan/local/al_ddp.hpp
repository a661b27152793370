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

// Augmented-Lagrangian DDP for linear time-invariant dynamics with quadratic
// tracking cost and general smooth inequality constraints c(x, u) >= 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "digplan/common.hpp"

namespace digplan {

template <int Nx, int Nu>
struct TrackingProblem {
  using StateVec = Eigen::Matrix<double, Nx, 1>;
  Eigen::Matrix<double, Nx, Nx> A;
  Eigen::Matrix<double, Nx, Nu> B;
  Eigen::Matrix<double, Nx, Nx> Q;  // stage state weight
  Eigen::Matrix<double, Nx, Nx> P;  // terminal weight
  Eigen::Matrix<double, Nu, Nu> R;
  std::vector<StateVec> reference;  // N + 1 states

  int horizon() const { return static_cast<int>(reference.size()) - 1; }
};

/// Stage rows c(k, x, u) and terminal rows c_N(x), feasible when >= 0.
/// Jacobians default to forward differences.
template <int Nx, int Nu>
class ConstraintModel {
 public:
  using StateVec = Eigen::Matrix<double, Nx, 1>;
  using InputVec = Eigen::Matrix<double, Nu, 1>;

  virtual ~ConstraintModel() = default;
  virtual int StageRows() const = 0;
  virtual int TerminalRows() const = 0;
  virtual VecX Stage(int k, const StateVec& x, const InputVec& u) const = 0;
  virtual VecX Terminal(const StateVec& x) const = 0;

  virtual void StageJacobian(int k, const StateVec& x, const InputVec& u, const VecX& c,
                             MatX* cx, MatX* cu) const {
    cx->resize(c.size(), Nx);
    cu->resize(c.size(), Nu);
    for (int j = 0; j < Nx; ++j) {
      StateVec xp = x;
      const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
      xp[j] += h;
      cx->col(j) = (Stage(k, xp, u) - c) / h;
    }
    for (int j = 0; j < Nu; ++j) {
      InputVec up = u;
      const double h = 1e-7 * std::max(1.0, std::abs(u[j]));
      up[j] += h;
      cu->col(j) = (Stage(k, x, up) - c) / h;
    }
  }

  virtual MatX TerminalJacobian(const StateVec& x, const VecX& c) const {
    MatX cx(c.size(), Nx);
    for (int j = 0; j < Nx; ++j) {
      StateVec xp = x;
      const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
      xp[j] += h;
      cx.col(j) = (Terminal(xp) - c) / h;
    }
    return cx;
  }
};

struct AlDdpOptions {
  double penalty_initial = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e8;
  double multiplier_max = 1e8;
  int max_outer_iterations = 20;
  int max_iterations = 200;  // DDP iterations over all outer loops
  double regularization_min = 1e-8;
  double regularization_max = 1e10;
  double regularization_increase = 10.0;
  double regularization_decrease = 2.0;
  int line_search_steps = 11;  // alpha = 1, 1/2, ..., 2^-10
  double cost_tolerance = 1e-8;
  double violation_tolerance = 1e-6;
};

template <int Nx, int Nu>
struct AlDdpResult {
  std::vector<Eigen::Matrix<double, Nx, 1>> x;
  std::vector<Eigen::Matrix<double, Nu, 1>> u;
  double cost = 0.0;  // tracking cost without penalty terms
  double max_violation = 0.0;
  bool converged = false;
  int iterations = 0;
  int outer_iterations = 0;
  std::vector<double> violation_history;  // after each outer iteration
  std::vector<VecX> stage_multipliers;
  VecX terminal_multipliers;
};

template <int Nx, int Nu>
class AlDdpSolver {
 public:
  using StateVec = Eigen::Matrix<double, Nx, 1>;
  using InputVec = Eigen::Matrix<double, Nu, 1>;
  using MatXX = Eigen::Matrix<double, Nx, Nx>;
  using MatUU = Eigen::Matrix<double, Nu, Nu>;
  using MatUX = Eigen::Matrix<double, Nu, Nx>;
  using Problem = TrackingProblem<Nx, Nu>;
  using Result = AlDdpResult<Nx, Nu>;

  explicit AlDdpSolver(AlDdpOptions options = {}) : o_(options) {}

  /// `u_init` seeds the inputs (zeros if empty); `stage_multipliers` and
  /// `terminal_multipliers` warm-start the multipliers when sized right.
  Result Solve(const Problem& p, const ConstraintModel<Nx, Nu>& con, const StateVec& x0,
               std::vector<InputVec> u_init, std::vector<VecX> stage_multipliers = {},
               VecX terminal_multipliers = {}) const {
    const int n = p.horizon();
    Work w{p, con, {}, {}, {}, {}, 10.0, {}, {}, 0.0, 0.0, 0.0};
    w.u = std::move(u_init);
    w.u.resize(n, InputVec::Zero());
    w.lambda = std::move(stage_multipliers);
    if (static_cast<int>(w.lambda.size()) != n) w.lambda.assign(n, VecX());
    for (VecX& l : w.lambda) {
      if (l.size() != con.StageRows()) l = VecX::Zero(con.StageRows());
    }
    w.lambda_n = terminal_multipliers.size() == con.TerminalRows()
                     ? terminal_multipliers
                     : VecX::Zero(con.TerminalRows());
    w.mu = o_.penalty_initial;
    w.x = Rollout(p, x0, w.u);

    Result best;
    double best_key_violation = kInf, best_cost = kInf;
    const auto remember = [&](const Result& r) {
      const bool feasible = r.max_violation <= o_.violation_tolerance;
      const bool best_feasible = best_key_violation <= o_.violation_tolerance;
      const bool better = feasible ? (!best_feasible || r.cost < best_cost)
                                   : (!best_feasible && r.max_violation < best_key_violation);
      if (better || best.x.empty()) {
        best = r;
        best_key_violation = r.max_violation;
        best_cost = r.cost;
      }
    };

    Result cur;
    double prev_violation = kInf;
    int iterations = 0;
    for (int outer = 0; outer < o_.max_outer_iterations; ++outer) {
      const bool inner_converged = MinimizeInner(w, x0, &iterations);
      Evaluate(w);
      cur.x = w.x;
      cur.u = w.u;
      cur.cost = w.tracking;
      cur.max_violation = w.violation;
      cur.iterations = iterations;
      cur.outer_iterations = outer + 1;
      cur.violation_history.push_back(w.violation);
      // Rows holding a multiplier must be active.
      double slack = 0.0;
      for (int k = 0; k < n; ++k) slack = std::max(slack, Complementarity(w.c[k], w.lambda[k]));
      slack = std::max(slack, Complementarity(w.c_n, w.lambda_n));
      cur.converged = inner_converged && w.violation <= o_.violation_tolerance &&
                      slack <= o_.violation_tolerance;

      if (!cur.converged) {
        // PHR multiplier update; penalty grows when progress stalls.
        for (int k = 0; k < n; ++k) UpdateMultipliers(w.c[k], w.mu, &w.lambda[k]);
        UpdateMultipliers(w.c_n, w.mu, &w.lambda_n);
        if (w.violation > 0.25 * prev_violation) {
          w.mu = std::min(w.mu * o_.penalty_growth, o_.penalty_max);
        }
      }
      cur.stage_multipliers = w.lambda;
      cur.terminal_multipliers = w.lambda_n;
      remember(cur);
      best.violation_history = cur.violation_history;
      best.iterations = iterations;
      best.outer_iterations = outer + 1;
      if (cur.converged || iterations >= o_.max_iterations) break;
      prev_violation = w.violation;
    }
    best.stage_multipliers = w.lambda;
    best.terminal_multipliers = w.lambda_n;
    return best;
  }

  static std::vector<StateVec> Rollout(const Problem& p, const StateVec& x0,
                                       const std::vector<InputVec>& u) {
    std::vector<StateVec> x(u.size() + 1);
    x[0] = x0;
    for (std::size_t k = 0; k < u.size(); ++k) x[k + 1] = p.A * x[k] + p.B * u[k];
    return x;
  }

  static double TrackingCost(const Problem& p, const std::vector<StateVec>& x,
                             const std::vector<InputVec>& u) {
    const int n = p.horizon();
    double j = 0.0;
    for (int k = 0; k < n; ++k) {
      const StateVec e = x[k] - p.reference[k];
      j += e.dot(p.Q * e) + u[k].dot(p.R * u[k]);
    }
    const StateVec e = x[n] - p.reference[n];
    return j + e.dot(p.P * e);
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  struct Work {
    const Problem& p;
    const ConstraintModel<Nx, Nu>& con;
    std::vector<StateVec> x;
    std::vector<InputVec> u;
    std::vector<VecX> lambda;
    VecX lambda_n;
    double mu = 10.0;
    // Filled by Evaluate.
    std::vector<VecX> c;
    VecX c_n;
    double tracking = 0.0;
    double merit = 0.0;
    double violation = 0.0;
  };

  // PHR term (max(0, lambda - mu c)^2 - lambda^2) / (2 mu) summed over rows.
  static double Penalty(const VecX& c, const VecX& lambda, double mu) {
    double s = 0.0;
    for (int i = 0; i < c.size(); ++i) {
      const double a = std::max(0.0, lambda[i] - mu * c[i]);
      s += (a * a - lambda[i] * lambda[i]) / (2.0 * mu);
    }
    return s;
  }

  static double Complementarity(const VecX& c, const VecX& lambda) {
    double s = 0.0;
    for (int i = 0; i < c.size(); ++i) s = std::max(s, std::abs(std::min(lambda[i], c[i])));
    return s;
  }

  void UpdateMultipliers(const VecX& c, double mu, VecX* lambda) const {
    for (int i = 0; i < c.size(); ++i) {
      (*lambda)[i] = std::clamp((*lambda)[i] - mu * c[i], 0.0, o_.multiplier_max);
    }
  }

  static void CheckFinite(const std::vector<StateVec>& x) {
    for (const StateVec& s : x) {
      if (!s.allFinite()) throw DivergenceError("non-finite state in the MPC rollout");
    }
  }

  // Merit, constraints and violation of the current trajectory.
  static void Evaluate(Work& w) {
    const int n = w.p.horizon();
    CheckFinite(w.x);
    w.c.resize(n);
    w.tracking = TrackingCost(w.p, w.x, w.u);
    double merit = w.tracking, worst = 0.0;
    for (int k = 0; k < n; ++k) {
      w.c[k] = w.con.Stage(k, w.x[k], w.u[k]);
      merit += Penalty(w.c[k], w.lambda[k], w.mu);
      if (w.c[k].size() > 0) worst = std::max(worst, -w.c[k].minCoeff());
    }
    w.c_n = w.con.Terminal(w.x[n]);
    merit += Penalty(w.c_n, w.lambda_n, w.mu);
    if (w.c_n.size() > 0) worst = std::max(worst, -w.c_n.minCoeff());
    w.merit = merit;
    w.violation = worst;
  }

  // Merit of a candidate without touching the work state.
  static double CandidateMerit(const Work& w, const std::vector<StateVec>& x,
                               const std::vector<InputVec>& u) {
    const int n = w.p.horizon();
    double merit = TrackingCost(w.p, x, u);
    for (int k = 0; k < n; ++k) merit += Penalty(w.con.Stage(k, x[k], u[k]), w.lambda[k], w.mu);
    return merit + Penalty(w.con.Terminal(x[n]), w.lambda_n, w.mu);
  }

  // Gradient and Gauss-Newton Hessian of the PHR term with respect to c.
  static void PenaltyDerivatives(const VecX& c, const VecX& lambda, double mu, VecX* g,
                                 VecX* h) {
    g->resize(c.size());
    h->resize(c.size());
    for (int i = 0; i < c.size(); ++i) {
      const double a = lambda[i] - mu * c[i];
      (*g)[i] = a > 0.0 ? -a : 0.0;
      (*h)[i] = a > 0.0 ? mu : 0.0;
    }
  }

  bool MinimizeInner(Work& w, const StateVec& x0, int* iterations) const {
    const Problem& p = w.p;
    const int n = p.horizon();
    Evaluate(w);
    double rho = o_.regularization_min;
    std::vector<InputVec> d(n);
    std::vector<MatUX> gain(n);
    std::vector<StateVec> x_new;
    std::vector<InputVec> u_new(n);

    // Stage derivatives at the current trajectory.
    std::vector<StateVec> lx(n + 1);
    std::vector<MatXX> lxx(n + 1);
    std::vector<InputVec> lu(n);
    std::vector<MatUU> luu(n);
    std::vector<MatUX> lux(n);
    bool have_derivatives = false;

    while (*iterations < o_.max_iterations) {
      if (!have_derivatives) {
        Linearize(w, &lx, &lxx, &lu, &luu, &lux);
        have_derivatives = true;
      }
      // Backward pass with the value Hessian shifted by rho.
      bool backward_ok = true;
      double expected = 0.0;  // model decrease for a full step
      StateVec vx = lx[n];
      MatXX vxx = lxx[n];
      for (int k = n - 1; k >= 0; --k) {
        const MatXX vreg = vxx + rho * MatXX::Identity();
        const StateVec qx = lx[k] + p.A.transpose() * vx;
        const InputVec qu = lu[k] + p.B.transpose() * vx;
        const MatXX qxx = lxx[k] + p.A.transpose() * vxx * p.A;
        const MatUU quu = luu[k] + p.B.transpose() * vreg * p.B;
        const MatUX qux = lux[k] + p.B.transpose() * vreg * p.A;
        const Eigen::LLT<MatUU> llt(quu);
        if (llt.info() != Eigen::Success) {
          backward_ok = false;
          break;
        }
        d[k] = -llt.solve(qu);
        gain[k] = -llt.solve(qux);
        expected -= d[k].dot(qu) + 0.5 * d[k].dot(quu * d[k]);
        vx = qx + gain[k].transpose() * quu * d[k] + gain[k].transpose() * qu +
             qux.transpose() * d[k];
        vxx = qxx + gain[k].transpose() * quu * gain[k] + gain[k].transpose() * qux +
              qux.transpose() * gain[k];
        vxx = 0.5 * (vxx + vxx.transpose()).eval();
      }
      ++*iterations;
      if (!backward_ok) {
        rho *= o_.regularization_increase;
        if (rho > o_.regularization_max) return false;
        continue;
      }

      // Near a minimizer only the full (Newton) step is tried, as a polish.
      const bool small = expected < o_.cost_tolerance * std::max(1.0, std::abs(w.merit));

      // Forward pass: backtracking on the actual merit.
      bool accepted = false;
      double merit_new = w.merit;
      double alpha = 1.0;
      const int steps = small ? 1 : o_.line_search_steps;
      for (int ls = 0; ls < steps; ++ls, alpha *= 0.5) {
        x_new.assign(n + 1, StateVec::Zero());
        x_new[0] = x0;
        for (int k = 0; k < n; ++k) {
          u_new[k] = w.u[k] + alpha * d[k] + gain[k] * (x_new[k] - w.x[k]);
          x_new[k + 1] = p.A * x_new[k] + p.B * u_new[k];
        }
        CheckFinite(x_new);
        merit_new = CandidateMerit(w, x_new, u_new);
        if (merit_new < w.merit) {
          accepted = true;
          break;
        }
      }
      if (small) {
        if (accepted) {
          w.x.swap(x_new);
          w.u.swap(u_new);
          Evaluate(w);
        }
        return true;
      }
      if (!accepted) {
        // No descent left at this regularization: either at the minimum or
        // the model is poor; raise rho and try again.
        rho *= o_.regularization_increase;
        if (rho > o_.regularization_max) return true;
        continue;
      }
      const double decrease = w.merit - merit_new;
      const double scale = std::max(1.0, std::abs(w.merit));
      w.x.swap(x_new);
      w.u.swap(u_new);
      Evaluate(w);
      have_derivatives = false;
      rho = std::max(rho / o_.regularization_decrease, o_.regularization_min);
      if (decrease < o_.cost_tolerance * scale) return true;
    }
    return false;
  }

  void Linearize(const Work& w, std::vector<StateVec>* lx, std::vector<MatXX>* lxx,
                 std::vector<InputVec>* lu, std::vector<MatUU>* luu,
                 std::vector<MatUX>* lux) const {
    const Problem& p = w.p;
    const int n = p.horizon();
    VecX g, h;
    MatX cx, cu;
    for (int k = 0; k < n; ++k) {
      const StateVec e = w.x[k] - p.reference[k];
      (*lx)[k] = 2.0 * p.Q * e;
      (*lxx)[k] = 2.0 * p.Q;
      (*lu)[k] = 2.0 * p.R * w.u[k];
      (*luu)[k] = 2.0 * p.R;
      (*lux)[k].setZero();
      PenaltyDerivatives(w.c[k], w.lambda[k], w.mu, &g, &h);
      if ((h.array() > 0.0).any() || (g.array() != 0.0).any()) {
        w.con.StageJacobian(k, w.x[k], w.u[k], w.c[k], &cx, &cu);
        (*lx)[k] += cx.transpose() * g;
        (*lu)[k] += cu.transpose() * g;
        (*lxx)[k] += cx.transpose() * h.asDiagonal() * cx;
        (*luu)[k] += cu.transpose() * h.asDiagonal() * cu;
        (*lux)[k] += cu.transpose() * h.asDiagonal() * cx;
      }
    }
    const StateVec e = w.x[n] - p.reference[n];
    (*lx)[n] = 2.0 * p.P * e;
    (*lxx)[n] = 2.0 * p.P;
    PenaltyDerivatives(w.c_n, w.lambda_n, w.mu, &g, &h);
    if ((h.array() > 0.0).any()) {
      const MatX cxn = w.con.TerminalJacobian(w.x[n], w.c_n);
      (*lx)[n] += cxn.transpose() * g;
      (*lxx)[n] += cxn.transpose() * h.asDiagonal() * cxn;
    }
  }

  AlDdpOptions o_;
};

}  // namespace digplan
