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
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "digplan/control/fl_pid.hpp"
#include "digplan/estimator/momentum_observer.hpp"
#include "digplan/harness/config.hpp"
#include "digplan/harness/normalize.hpp"
#include "digplan/local/mpc.hpp"
#include "digplan/model/constraints.hpp"
#include "digplan/planner/global_planner.hpp"
#include "digplan/plant/plant.hpp"
#include "json.hpp"

namespace digplan {

inline constexpr int kRunSchemaVersion = 1;
inline constexpr double kGradingToleranceM = 0.03;

/// One row per control period.
struct ControlRow {
  double t = 0.0;
  int phase = 0;
  CylinderState x;          // measured at the period start
  Vec4 reference = Vec4::Zero();
  ControlInput u = Vec4::Zero();  // first plant substep
  Vec4 dhat_l = Vec4::Zero();
  Vec4 delta_l = Vec4::Zero();    // truth at the period start
  std::array<double, kNumFamilies> residual{};  // worst over the period, normalized
  bool mpc_converged = false;
  int mpc_iterations = 0;
  int mpc_outer = 0;
  double mpc_violation = 0.0;
  TipPose tip;
  double soil_depth = 0.0;
  Vec2 soil_force = Vec2::Zero();
};

/// One row per plant step.
struct TruthRow {
  double t = 0.0;
  JointState x;
  CylinderState xl;
  ControlInput u = Vec4::Zero();
  Vec4 delta = Vec4::Zero();  // joint frame
  std::array<double, kNumFamilies> residual{};
};

struct PathTracking {
  double max_penetration_m = 0.0;  // below the target
  double max_gap_m = 0.0;          // above the target
  double within_tolerance = 0.0;   // fraction of samples with gap <= 3 cm
  int samples = 0;
};

struct RunReport {
  std::string scenario;
  double plan_duration_s = 0.0;
  std::array<double, 3> phase_duration_s{};
  double simulated_s = 0.0;
  double volume_m2 = 0.0;  // per unit bucket width
  double swept_m2 = 0.0;
  double capacity_m2 = 0.0;
  std::string volume_branch;
  double volume_m3 = 0.0;
  PathTracking via_path;  // straight tip segments between the phase-2 via points
  PathTracking planned;   // reference trajectory, one sample per control period
  PathTracking executed;
  std::array<double, kNumFamilies> worst_residual{};
  double worst_residual_all = 0.0;
  Vec4 tracking_rms = Vec4::Zero();  // cylinder coordinates
  Vec4 tracking_max = Vec4::Zero();
  Vec4 estimate_rms = Vec4::Zero();  // normalized, cylinder frame
  double peak_soil_force_n = 0.0;
  double peak_disturbance_norm = 0.0;  // max normalized |Delta_L| component
  int control_steps = 0;
  int mpc_converged = 0;
  double mpc_mean_iterations = 0.0;
  int mpc_max_iterations = 0;
  double soil_work_check = 0.0;  // max f . v over contact steps, <= 0 expected
};

/// Wall-clock figures. Kept apart from the deterministic outputs.
struct RunTiming {
  double global_plan_s = 0.0;
  double local_mean_ms = 0.0;
  double local_max_ms = 0.0;
  int local_overruns = 0;  // solves longer than the control period
  double total_s = 0.0;
};

struct RunResult {
  GlobalPlan plan;
  std::vector<ControlRow> rows;
  std::vector<TruthRow> truth;
  RunReport report;
  RunTiming timing;
};

/// Tip height above the target along a set of cylinder states.
inline PathTracking TrackTarget(const Kinematics& kin, const GroundModel& ground,
                                const std::vector<Vec4>& q_l) {
  PathTracking out;
  int within = 0;
  for (const Vec4& q : q_l) {
    const TipPose tip = kin.TipFromJoint(kin.CylinderToJoint(q));
    const double gap = tip.z - ground.Target(tip.x);
    out.max_penetration_m = std::max(out.max_penetration_m, -gap);
    out.max_gap_m = std::max(out.max_gap_m, gap);
    within += gap <= kGradingToleranceM ? 1 : 0;
  }
  out.samples = static_cast<int>(q_l.size());
  out.within_tolerance = out.samples ? static_cast<double>(within) / out.samples : 0.0;
  return out;
}

/// Same measure along the tip polyline through the via points.
inline PathTracking TrackPolyline(const TipPath& path, const GroundModel& ground,
                                  int per_segment = 20) {
  PathTracking out;
  int within = 0;
  auto visit = [&](double x, double z) {
    const double gap = z - ground.Target(x);
    out.max_penetration_m = std::max(out.max_penetration_m, -gap);
    out.max_gap_m = std::max(out.max_gap_m, gap);
    within += gap <= kGradingToleranceM ? 1 : 0;
    ++out.samples;
  };
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    for (int s = 0; s < per_segment; ++s) {
      const double a = static_cast<double>(s) / per_segment;
      visit((1.0 - a) * path[i].x + a * path[i + 1].x, (1.0 - a) * path[i].z + a * path[i + 1].z);
    }
  }
  if (!path.empty()) visit(path.back().x, path.back().z);
  out.within_tolerance = out.samples ? static_cast<double>(within) / out.samples : 0.0;
  return out;
}

inline std::array<double, kNumFamilies> NormalizedFamilies(const CylinderState& x,
                                                          const ControlInput& u,
                                                          const PhysicalLimits& lim) {
  const ConstraintResiduals r = EvaluateConstraints(x, u, lim);
  ConstraintResiduals n;
  n.values = r.values.cwiseQuotient(ResidualScales(lim));
  return n.FamilyMinima();
}

/// Global plan, then the receding-horizon loop: estimate, local plan,
/// control and plant substeps. Throws InfeasibleError or DivergenceError.
inline RunResult RunScenario(const ScenarioConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();
  RunResult out;
  out.plan = PlanGlobal(cfg.plan);
  out.timing.global_plan_s = out.plan.wall_time_s;

  const ModelParams& model = cfg.model();
  const PhysicalLimits& lim = cfg.limits();
  const Kinematics kin(model);
  const Normalizer norm(lim);
  Plant plant(model, cfg.plant);
  MpcSolver mpc(model, lim, cfg.mpc);
  MomentumObserver observer(plant.dynamics(), cfg.observer_gain);
  FlPidController controller(plant.dynamics(), cfg.controller);

  const double dt = cfg.mpc.dt;
  const int substeps = static_cast<int>(std::lround(dt / cfg.plant.dt));
  if (substeps < 1 || std::abs(substeps * cfg.plant.dt - dt) > 1e-12) {
    throw ConfigError("plant.dt_s", "must divide mpc.dt_s");
  }
  const double h = dt / substeps;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto measure = [&](const JointState& x) {
    if (cfg.observer_noise_std <= 0.0) return x;
    JointState m = x;
    for (int j = 0; j < 4; ++j) m.q[j] += cfg.observer_noise_std * gauss(rng);
    for (int j = 0; j < 4; ++j) m.qd[j] += cfg.observer_noise_std * gauss(rng);
    return m;
  };

  const GlobalTrajectory& g = out.plan.trajectory;
  plant.Reset(kin.ToJoint(g.x.front()));
  JointState meas = measure(plant.state().x);
  observer.Init(meas);

  const int steps = static_cast<int>(std::ceil((g.duration + cfg.settle_s) / dt - 1e-9)) + 1;
  RunReport& rep = out.report;
  rep.worst_residual.fill(std::numeric_limits<double>::infinity());
  Vec4 err_sq = Vec4::Zero(), est_sq = Vec4::Zero();
  double solve_ms_sum = 0.0;
  long iterations_sum = 0;
  rep.soil_work_check = -std::numeric_limits<double>::infinity();
  std::vector<Vec4> executed_cut;

  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    ControlRow row;
    row.t = t;
    const CylinderState xl = kin.ToCylinder(meas);
    const Vec4 dhat_l = observer.CylinderEstimate(xl.q);
    const LocalPlanStep step = mpc.PlanStep(t, xl, dhat_l, g);
    const Vec4 v0 = step.solution.v.front();
    solve_ms_sum += step.solution.solve_time_ms;
    out.timing.local_max_ms = std::max(out.timing.local_max_ms, step.solution.solve_time_ms);
    out.timing.local_overruns += step.solution.solve_time_ms > 1e3 * dt ? 1 : 0;

    const int ref_index = std::min(static_cast<int>(std::lround(t / g.dt)), g.size() - 1);
    row.phase = t <= g.duration + 1e-9 ? g.phase[ref_index] : 4;
    row.x = kin.ToCylinder(plant.state().x);
    row.reference = g.Reference(ref_index).q;
    row.dhat_l = dhat_l;
    row.delta_l = MomentumObserver::ToCylinderFrame(kin, plant.state().delta, row.x.q);
    row.mpc_converged = step.solution.converged;
    row.mpc_iterations = step.solution.iterations;
    row.mpc_outer = step.solution.outer_iterations;
    row.mpc_violation = step.solution.max_violation;
    row.tip = kin.TipFromJoint(plant.state().x.q);
    row.soil_depth = plant.state().soil_depth;
    row.soil_force = plant.state().soil_force;
    row.residual.fill(std::numeric_limits<double>::infinity());
    if (row.phase == 2) executed_cut.push_back(row.x.q);

    const Vec4 e = row.x.q - row.reference;
    err_sq += e.cwiseProduct(e);
    rep.tracking_max = rep.tracking_max.cwiseMax(e.cwiseAbs());
    const Vec4 de = norm.Disturbance(row.dhat_l - row.delta_l);
    est_sq += de.cwiseProduct(de);
    rep.peak_disturbance_norm =
        std::max(rep.peak_disturbance_norm, norm.Disturbance(row.delta_l).cwiseAbs().maxCoeff());
    iterations_sum += row.mpc_iterations;
    rep.mpc_max_iterations = std::max(rep.mpc_max_iterations, row.mpc_iterations);
    rep.mpc_converged += row.mpc_converged ? 1 : 0;

    for (int i = 0; i < substeps; ++i) {
      const double s = i * h;
      ControlInput u;
      if (cfg.drive == PlantDrive::kController) {
        const CylinderState x_d{xl.q + s * xl.qd + 0.5 * s * s * v0, xl.qd + s * v0};
        u = controller.Control(x_d, v0, meas, observer.estimate(), h);
      } else {
        u = step.u_ff;
      }
      if (i == 0) row.u = u;

      TruthRow tr;
      tr.t = plant.state().t;
      tr.x = plant.state().x;
      tr.xl = kin.ToCylinder(tr.x);
      tr.u = u;
      tr.delta = plant.state().delta;
      tr.residual = NormalizedFamilies(tr.xl, u, lim);
      for (int f = 0; f < kNumFamilies; ++f) {
        row.residual[f] = std::min(row.residual[f], tr.residual[f]);
        rep.worst_residual[f] = std::min(rep.worst_residual[f], tr.residual[f]);
      }
      const double f_norm = plant.state().soil_force.norm();
      rep.peak_soil_force_n = std::max(rep.peak_soil_force_n, f_norm);
      if (f_norm > 0.0) {
        rep.soil_work_check =
            std::max(rep.soil_work_check, plant.state().soil_force.dot(plant.state().tip_velocity));
      }
      out.truth.push_back(tr);

      plant.Step(u, h);
      meas = measure(plant.state().x);
      observer.Update(meas, u, h);
    }
    out.rows.push_back(row);
  }

  rep.scenario = cfg.name;
  rep.plan_duration_s = g.duration;
  rep.phase_duration_s = {out.plan.pieces.approach.duration, out.plan.pieces.cut.duration(),
                          out.plan.pieces.carry.duration};
  rep.simulated_s = plant.state().t;
  rep.volume_m2 = out.plan.cut.volume.value;
  rep.swept_m2 = out.plan.cut.volume.swept;
  rep.capacity_m2 = out.plan.cut.volume.capacity;
  rep.volume_branch = out.plan.cut.volume.active == VolumeBranch::kCapacity ? "capacity" : "swept";
  rep.volume_m3 = rep.volume_m2 * cfg.plant.soil.bucket_width_m;
  std::vector<Vec4> planned_cut;
  for (int k = 0; k < g.size(); ++k) {
    if (g.phase[k] == 2) planned_cut.push_back(g.x[k].q);
  }
  rep.via_path = TrackPolyline(out.plan.cut.path, cfg.plan.cut.ground);
  rep.planned = TrackTarget(kin, cfg.plan.cut.ground, planned_cut);
  rep.executed = TrackTarget(kin, cfg.plan.cut.ground, executed_cut);
  rep.worst_residual_all = *std::min_element(rep.worst_residual.begin(), rep.worst_residual.end());
  rep.control_steps = steps;
  rep.tracking_rms = (err_sq / steps).cwiseSqrt();
  rep.estimate_rms = (est_sq / steps).cwiseSqrt();
  rep.mpc_mean_iterations = static_cast<double>(iterations_sum) / steps;
  if (!std::isfinite(rep.soil_work_check)) rep.soil_work_check = 0.0;

  out.timing.local_mean_ms = solve_ms_sum / steps;
  out.timing.total_s = std::chrono::duration<double>(Clock::now() - t_start).count();
  return out;
}

namespace run_detail {

inline void Num(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  os << buf;
}

template <typename V>
void Nums(std::ostream& os, const V& v) {
  for (int i = 0; i < static_cast<int>(v.size()); ++i) {
    os << ',';
    Num(os, v[i]);
  }
}

}  // namespace run_detail

inline void WriteRunCsv(std::ostream& os, const RunResult& r, const PhysicalLimits& lim) {
  using run_detail::Num;
  using run_detail::Nums;
  const Normalizer norm(lim);
  os << "t,phase,psi_U,L_B,L_A,L_K,dpsi_U,dL_B,dL_A,dL_K,"
        "ref_psi_U,ref_L_B,ref_L_A,ref_L_K,"
        "u_U,u_B,u_A,u_K,un_U,un_B,un_A,un_K,"
        "dhat_U,dhat_B,dhat_A,dhat_K,dhatn_U,dhatn_B,dhatn_A,dhatn_K,"
        "delta_U,delta_B,delta_A,delta_K,deltan_U,deltan_B,deltan_A,deltan_K,"
        "Ln_B,Ln_A,Ln_K,power_n,flow1_n,flow2_n,"
        "res_force,res_power,res_length,res_flow,"
        "mpc_converged,mpc_iterations,mpc_outer,mpc_violation,tip_x,tip_z,soil_depth,"
        "soil_fx,soil_fz\n";
  for (const ControlRow& row : r.rows) {
    Num(os, row.t);
    os << ',' << row.phase;
    Nums(os, row.x.q);
    Nums(os, row.x.qd);
    Nums(os, row.reference);
    Nums(os, row.u);
    Nums(os, norm.Input(row.u));
    Nums(os, row.dhat_l);
    Nums(os, norm.Disturbance(row.dhat_l));
    Nums(os, row.delta_l);
    Nums(os, norm.Disturbance(row.delta_l));
    Nums(os, norm.Length(row.x.lengths()));
    os << ',';
    Num(os, norm.Power(row.u.dot(row.x.qd)));
    for (int p = 0; p < 2; ++p) {
      os << ',';
      Num(os, norm.Flow(p, PumpFlow(lim.pumps[p], row.x.qd)));
    }
    Nums(os, row.residual);
    os << ',' << (row.mpc_converged ? 1 : 0) << ',' << row.mpc_iterations << ',' << row.mpc_outer;
    os << ',';
    Num(os, row.mpc_violation);
    os << ',';
    Num(os, row.tip.x);
    os << ',';
    Num(os, row.tip.z);
    os << ',';
    Num(os, row.soil_depth);
    Nums(os, row.soil_force);
    os << '\n';
  }
}

inline void WriteTruthCsv(std::ostream& os, const RunResult& r) {
  using run_detail::Num;
  using run_detail::Nums;
  os << "t,psi_U,theta_B,theta_A,theta_K,dpsi_U,dtheta_B,dtheta_A,dtheta_K,"
        "L_U,L_B,L_A,L_K,dL_U,dL_B,dL_A,dL_K,u_U,u_B,u_A,u_K,"
        "delta_U,delta_B,delta_A,delta_K,res_force,res_power,res_length,res_flow\n";
  for (const TruthRow& tr : r.truth) {
    Num(os, tr.t);
    Nums(os, tr.x.q);
    Nums(os, tr.x.qd);
    Nums(os, tr.xl.q);
    Nums(os, tr.xl.qd);
    Nums(os, tr.u);
    Nums(os, tr.delta);
    Nums(os, tr.residual);
    os << '\n';
  }
}

inline nlohmann::ordered_json ReportJson(const RunReport& r) {
  auto vec = [](const auto& v) {
    std::vector<double> out;
    for (int i = 0; i < static_cast<int>(v.size()); ++i) out.push_back(v[i]);
    return out;
  };
  auto tracking = [](const PathTracking& p) {
    return nlohmann::ordered_json{{"max_penetration_m", p.max_penetration_m},
                                  {"max_gap_m", p.max_gap_m},
                                  {"fraction_within_3cm", p.within_tolerance},
                                  {"samples", p.samples}};
  };
  nlohmann::ordered_json residual;
  for (int f = 0; f < kNumFamilies; ++f) residual[kFamilyNames[f]] = r.worst_residual[f];
  residual["all"] = r.worst_residual_all;
  return nlohmann::ordered_json{
      {"schema_version", kRunSchemaVersion},
      {"scenario", r.scenario},
      {"plan_duration_s", r.plan_duration_s},
      {"phase_duration_s", vec(r.phase_duration_s)},
      {"simulated_s", r.simulated_s},
      {"excavated_volume",
       {{"per_width_m2", r.volume_m2},
        {"swept_per_width_m2", r.swept_m2},
        {"capacity_per_width_m2", r.capacity_m2},
        {"active_branch", r.volume_branch},
        {"volume_m3", r.volume_m3}}},
      {"phase2_via_path", tracking(r.via_path)},
      {"phase2_planned", tracking(r.planned)},
      {"phase2_executed", tracking(r.executed)},
      {"worst_normalized_residual", residual},
      {"tracking_rms", vec(r.tracking_rms)},
      {"tracking_max", vec(r.tracking_max)},
      {"estimate_rms_normalized", vec(r.estimate_rms)},
      {"peak_soil_force_n", r.peak_soil_force_n},
      {"peak_disturbance_normalized", r.peak_disturbance_norm},
      {"soil_power_max_w", r.soil_work_check},
      {"local_planner",
       {{"steps", r.control_steps},
        {"converged", r.mpc_converged},
        {"mean_iterations", r.mpc_mean_iterations},
        {"max_iterations", r.mpc_max_iterations}}}};
}

inline void WriteReportText(std::ostream& os, const RunReport& r) {
  const nlohmann::ordered_json j = ReportJson(r);
  // Flattened "a.b value" lines.
  std::function<void(const nlohmann::ordered_json&, const std::string&)> walk =
      [&](const nlohmann::ordered_json& node, const std::string& prefix) {
        if (node.is_object()) {
          for (auto it = node.begin(); it != node.end(); ++it) {
            walk(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
          }
        } else {
          os << prefix << ' ' << node.dump() << '\n';
        }
      };
  walk(j, "");
}

inline nlohmann::ordered_json TimingJson(const RunTiming& t) {
  return nlohmann::ordered_json{{"global_plan_s", t.global_plan_s},
                                {"local_mean_ms", t.local_mean_ms},
                                {"local_max_ms", t.local_max_ms},
                                {"local_overruns", t.local_overruns},
                                {"total_s", t.total_s}};
}

}  // namespace digplan
