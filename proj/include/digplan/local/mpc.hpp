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

// Receding-horizon tracking on the feedback-linearized (double integrator)
// cylinder dynamics. Physical limits enter as nonlinear stage constraints on
// the realized input u = h_L + M_L v - disturbance estimate.

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "digplan/common.hpp"
#include "digplan/local/al_ddp.hpp"
#include "digplan/model/constraints.hpp"
#include "digplan/model/dynamics.hpp"
#include "digplan/model/params.hpp"
#include "digplan/planner/global_trajectory.hpp"

namespace digplan {

using Mat84 = Eigen::Matrix<double, 8, 4>;

inline Mat8 DefaultMpcStateWeight() {
  Vec8 d;
  d << Vec4::Constant(1e4), Vec4::Constant(1e2);
  return d.asDiagonal();
}

struct MpcConfig {
  int horizon = 50;
  double dt = 0.02;
  Mat8 Q = DefaultMpcStateWeight();
  Mat8 P = 10.0 * DefaultMpcStateWeight();
  Mat4 R = 1e-2 * Mat4::Identity();
  AlDdpOptions al;
  double flow_smoothing_mps = 1e-4;  // |v| ~ sqrt(v^2 + eps^2) inside the solver
  double constraint_margin = 5e-3;   // normalized back-off on every solver row

  void Validate() const {
    if (horizon < 1) throw ConfigError("mpc.horizon", "must be at least 1");
    if (!(dt > 0.0)) throw ConfigError("mpc.dt_s", "must be positive");
    const auto psd = [](const MatX& m) {
      return m.isApprox(m.transpose()) &&
             Eigen::SelfAdjointEigenSolver<MatX>(m).eigenvalues().minCoeff() >= -1e-12;
    };
    if (!psd(Q)) throw ConfigError("mpc.Q", "must be symmetric positive semidefinite");
    if (!psd(P)) throw ConfigError("mpc.P", "must be symmetric positive semidefinite");
    if (!R.isApprox(R.transpose()) || R.llt().info() != Eigen::Success) {
      throw ConfigError("mpc.R", "must be symmetric positive definite");
    }
    if (!(al.penalty_initial > 0.0)) throw ConfigError("mpc.penalty_initial", "must be positive");
    if (!(al.penalty_growth > 1.0)) throw ConfigError("mpc.penalty_growth", "must exceed 1");
    if (!(flow_smoothing_mps > 0.0)) throw ConfigError("mpc.flow_smoothing_mps", "must be positive");
    if (!(constraint_margin >= 0.0 && constraint_margin < 0.5)) {
      throw ConfigError("mpc.constraint_margin", "must lie in [0, 0.5)");
    }
  }
};

/// u = h_L + M_L v - disturbance estimate.
inline ControlInput FeedbackLinearize(const Dynamics& dyn, const CylinderState& x, const Vec4& v,
                                      const Vec4& disturbance) {
  return dyn.InverseCylinder(x, v) - disturbance;
}

struct DiscreteDoubleIntegrator {
  Mat8 A;
  Mat84 B;
};

/// Exact zero-order hold of q'' = v over one step.
inline DiscreteDoubleIntegrator Discretize(double dt) {
  if (!(dt > 0.0)) throw ConfigError("mpc.dt_s", "must be positive");
  DiscreteDoubleIntegrator d;
  d.A.setIdentity();
  d.A.topRightCorner<4, 4>() = dt * Mat4::Identity();
  d.B << 0.5 * dt * dt * Mat4::Identity(), dt * Mat4::Identity();
  return d;
}

inline CylinderState SplitState(const Vec8& x) { return {x.head<4>(), x.tail<4>()}; }

/// Physical-limit residuals at (x, FL(x, v)); the terminal stage keeps only
/// the input-free rows (strokes and pump flow).
inline ConstraintResiduals StageConstraints(const Dynamics& dyn, const Vec8& x, const Vec4& v,
                                            const Vec4& disturbance, const PhysicalLimits& lim) {
  const CylinderState s = SplitState(x);
  return EvaluateConstraints(s, FeedbackLinearize(dyn, s, v, disturbance), lim);
}

inline constexpr int kTerminalRows =
    ConstraintResiduals::kSize - ConstraintResiduals::kStateOnlyBegin;

inline VecX TerminalConstraints(const Vec8& x, const PhysicalLimits& lim) {
  const ConstraintResiduals r = EvaluateConstraints(SplitState(x), Vec4::Zero(), lim);
  return r.values.tail<kTerminalRows>();
}

/// Normalized limit rows seen by the solver, with a smoothed flow magnitude.
class FlConstraintModel : public ConstraintModel<8, 4> {
 public:
  FlConstraintModel(const Dynamics& dyn, const PhysicalLimits& lim, const Vec4& disturbance,
                    double flow_eps, double margin = 0.0)
      : dyn_(dyn),
        lim_(lim),
        dhat_(disturbance),
        eps_(flow_eps),
        margin_(margin),
        scale_(ResidualScales(lim)) {}

  int StageRows() const override { return ConstraintResiduals::kSize; }
  int TerminalRows() const override { return kTerminalRows; }

  // The initial state is measured, not decided: its state-only rows are
  // reported as satisfied so a slightly violating measurement cannot make
  // the whole horizon infeasible.
  VecX Stage(int k, const StateVec& x, const InputVec& v) const override {
    const CylinderState s = SplitState(x);
    const ControlInput u = dyn_.InverseCylinder(s, v) - dhat_;
    VecX c(ConstraintResiduals::kSize);
    c.segment<4>(0) = u - lim_.u_lower;
    c.segment<4>(4) = lim_.u_upper - u;
    c[8] = lim_.power_max_w - u.dot(s.qd);
    StateRows(x, c.tail<kTerminalRows>());
    c = c.cwiseQuotient(scale_).array() - margin_;
    if (k == 0) c.tail<kTerminalRows>().setOnes();
    return c;
  }

  VecX Terminal(const StateVec& x) const override {
    VecX c(kTerminalRows);
    StateRows(x, c);
    return c.cwiseQuotient(scale_.tail<kTerminalRows>()).array() - margin_;
  }

  // Force rows are exact in v (slope M_L); state partials of u come from
  // forward differences of the inverse dynamics.
  void StageJacobian(int k, const StateVec& x, const InputVec& v, const VecX&, MatX* cx,
                     MatX* cu) const override {
    const CylinderState s = SplitState(x);
    const CylinderDynamics d = dyn_.Cylinder(s);
    const ControlInput u = d.M * v + d.h - dhat_;
    Eigen::Matrix<double, 4, 8> du_dx;
    for (int j = 0; j < 8; ++j) {
      StateVec xp = x;
      const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
      xp[j] += h;
      du_dx.col(j) = (dyn_.InverseCylinder(SplitState(xp), v) - dhat_ - u) / h;
    }
    cx->setZero(ConstraintResiduals::kSize, 8);
    cu->setZero(ConstraintResiduals::kSize, 4);
    cx->topRows<4>() = du_dx;
    cx->middleRows<4>(4) = -du_dx;
    cu->topRows<4>() = d.M;
    cu->middleRows<4>(4) = -d.M;
    cx->row(8) = -s.qd.transpose() * du_dx;
    cx->row(8).tail<4>() -= u.transpose();
    cu->row(8) = -s.qd.transpose() * d.M;
    if (k > 0) cx->bottomRows<kTerminalRows>() = StateRowJacobian(x);
    for (int r = 0; r < ConstraintResiduals::kSize; ++r) {
      cx->row(r) /= scale_[r];
      cu->row(r) /= scale_[r];
    }
  }

  MatX TerminalJacobian(const StateVec& x, const VecX&) const override {
    MatX j = StateRowJacobian(x);
    for (int r = 0; r < kTerminalRows; ++r) j.row(r) /= scale_[ConstraintResiduals::kStateOnlyBegin + r];
    return j;
  }

 private:
  double SmoothAbs(double v) const { return std::sqrt(v * v + eps_ * eps_); }

  template <typename Out>
  void StateRows(const StateVec& x, Out&& c) const {
    for (int j = 0; j < 3; ++j) {
      c[j] = x[1 + j] - lim_.length_lower[j];
      c[3 + j] = lim_.length_upper[j] - x[1 + j];
    }
    for (int i = 0; i < 2; ++i) {
      double f = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double qd = x[4 + j];
        f += (qd >= 0.0 ? lim_.pumps[i].area_expand[j] : lim_.pumps[i].area_contract[j]) *
             SmoothAbs(qd);
      }
      c[6 + i] = lim_.pumps[i].flow_max_m3ps - f;
    }
  }

  MatX StateRowJacobian(const StateVec& x) const {
    MatX j = MatX::Zero(kTerminalRows, 8);
    for (int k = 0; k < 3; ++k) {
      j(k, 1 + k) = 1.0;
      j(3 + k, 1 + k) = -1.0;
    }
    for (int i = 0; i < 2; ++i) {
      for (int k = 0; k < 4; ++k) {
        const double qd = x[4 + k];
        const double area = qd >= 0.0 ? lim_.pumps[i].area_expand[k] : lim_.pumps[i].area_contract[k];
        j(6 + i, 4 + k) = -area * qd / SmoothAbs(qd);
      }
    }
    return j;
  }

  const Dynamics& dyn_;
  const PhysicalLimits& lim_;
  Vec4 dhat_;
  double eps_;
  double margin_;
  VecX scale_;
};

struct MpcSolution {
  std::vector<Vec8> x;        // x_0..x_N
  std::vector<Vec4> v;        // virtual inputs
  std::vector<ControlInput> u;  // realized inputs FL(x_k, v_k)
  // Exact (unsmoothed) normalized residual minimum per step; the last entry
  // covers the terminal rows only.
  std::vector<double> residual_min;
  std::array<double, kNumFamilies> family_min{};
  double max_violation = 0.0;  // solver view, normalized and smoothed
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
  int outer_iterations = 0;
  std::vector<double> violation_history;
  double solve_time_ms = 0.0;  // wall clock, kept out of deterministic logs
};

/// N + 1 reference states starting at time t, linearly interpolated between
/// trajectory samples and holding the final sample past the end.
inline std::vector<Vec8> ReferenceWindow(const GlobalTrajectory& g, double t, int horizon,
                                         double dt) {
  if (g.size() == 0) throw ConfigError("planner", "empty global trajectory");
  std::vector<Vec8> out(horizon + 1);
  for (int i = 0; i <= horizon; ++i) {
    const double s = std::max(0.0, (t + i * dt) / g.dt);
    const int k = static_cast<int>(std::floor(s));
    const CylinderState& a = g.Reference(k);
    const CylinderState& b = g.Reference(k + 1);
    const double w = k + 1 >= g.size() ? 0.0 : s - k;
    out[i] << (1.0 - w) * a.q + w * b.q, (1.0 - w) * a.qd + w * b.qd;
  }
  return out;
}

struct LocalPlanStep {
  CylinderState x_d;   // one-step-ahead planned state for the controller
  ControlInput u_ff;   // first realized input
  MpcSolution solution;
};

/// Owns the warm-start buffer; one instance per control loop.
class MpcSolver {
 public:
  MpcSolver(const ModelParams& model, PhysicalLimits limits, MpcConfig config)
      : dyn_(model), lim_(std::move(limits)), cfg_(Validated(std::move(config))),
        disc_(Discretize(cfg_.dt)), ddp_(cfg_.al) {}

  const MpcConfig& config() const { return cfg_; }
  const Dynamics& dynamics() const { return dyn_; }
  void ResetWarmStart() {
    warm_v_.clear();
    warm_lambda_.clear();
    warm_lambda_n_ = VecX();
  }

  MpcSolution Solve(const CylinderState& x0, const std::vector<Vec8>& window,
                    const Vec4& disturbance) {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = cfg_.horizon;
    if (static_cast<int>(window.size()) != n + 1) {
      throw ConfigError("mpc.horizon", "reference window must hold horizon + 1 states");
    }
    const Vec8 x_init = x0.stacked();
    if (!x_init.allFinite()) throw DivergenceError("non-finite MPC initial state");

    TrackingProblem<8, 4> prob{disc_.A, disc_.B, cfg_.Q, cfg_.P, cfg_.R, window};
    const FlConstraintModel con(dyn_, lim_, disturbance, cfg_.flow_smoothing_mps,
                                cfg_.constraint_margin);
    const AlDdpResult<8, 4> r = ddp_.Solve(prob, con, x_init, warm_v_, warm_lambda_, warm_lambda_n_);

    MpcSolution sol;
    sol.x = r.x;
    sol.v = r.u;
    sol.cost = r.cost;
    sol.converged = r.converged;
    sol.max_violation = r.max_violation;
    sol.iterations = r.iterations;
    sol.outer_iterations = r.outer_iterations;
    sol.violation_history = r.violation_history;
    const auto scale = ResidualScales(lim_);
    sol.family_min.fill(std::numeric_limits<double>::infinity());
    for (int k = 0; k < n; ++k) {
      const CylinderState s = SplitState(sol.x[k]);
      sol.u.push_back(FeedbackLinearize(dyn_, s, sol.v[k], disturbance));
      const ConstraintResiduals c = EvaluateConstraints(s, sol.u.back(), lim_);
      const auto normalized = c.values.cwiseQuotient(scale);
      sol.residual_min.push_back(normalized.minCoeff());
      for (int row = 0; row < ConstraintResiduals::kSize; ++row) {
        double& m = sol.family_min[static_cast<int>(ConstraintResiduals::FamilyOf(row))];
        m = std::min(m, normalized[row]);
      }
    }
    const VecX terminal = TerminalConstraints(sol.x[n], lim_).cwiseQuotient(
        scale.tail<kTerminalRows>());
    sol.residual_min.push_back(terminal.minCoeff());
    for (int row = 0; row < kTerminalRows; ++row) {
      double& m = sol.family_min[static_cast<int>(
          ConstraintResiduals::FamilyOf(ConstraintResiduals::kStateOnlyBegin + row))];
      m = std::min(m, terminal[row]);
    }

    // Shift by one step, repeating the last entry.
    warm_v_.assign(r.u.begin() + 1, r.u.end());
    warm_v_.push_back(r.u.back());
    warm_lambda_.assign(r.stage_multipliers.begin() + 1, r.stage_multipliers.end());
    warm_lambda_.push_back(r.stage_multipliers.back());
    warm_lambda_n_ = r.terminal_multipliers;

    sol.solve_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  LocalPlanStep PlanStep(double t, const CylinderState& x, const Vec4& disturbance,
                         const GlobalTrajectory& global) {
    LocalPlanStep out;
    out.solution = Solve(x, ReferenceWindow(global, t, cfg_.horizon, cfg_.dt), disturbance);
    out.x_d = SplitState(out.solution.x[1]);
    out.u_ff = out.solution.u[0];
    return out;
  }

 private:
  static MpcConfig Validated(MpcConfig c) {
    c.Validate();
    return c;
  }

  Dynamics dyn_;
  PhysicalLimits lim_;
  MpcConfig cfg_;
  DiscreteDoubleIntegrator disc_;
  AlDdpSolver<8, 4> ddp_;
  std::vector<Vec4> warm_v_;
  std::vector<VecX> warm_lambda_;
  VecX warm_lambda_n_;
};

}  // namespace digplan
