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
#include <chrono>
#include <ostream>
#include <vector>

#include "digplan/common.hpp"
#include "digplan/planner/global_trajectory.hpp"
#include "digplan/planner/phase13.hpp"
#include "digplan/planner/phase2.hpp"

namespace digplan {

struct GlobalPlanRequest {
  Phase2Problem cut;
  double dig_swing_rad = 0.0;
  Vec4 start = Vec4::Zero();  // at rest
  Vec4 dump = Vec4::Zero();   // at rest
  double utilization = 0.5;
  double dt = 0.02;
  // Settings shared by the approach and the carry; boundary, phase and the
  // bucket-angle floor are filled in by PlanGlobal.
  Phase13Problem free_motion;
};

struct GlobalPlan {
  PhasePieces pieces;
  GlobalTrajectory trajectory;
  Phase2Solution cut;
  Phase13Solution approach;
  Phase13Solution carry;
  double carry_theta_floor = 0.0;
  double wall_time_s = 0.0;  // excluded from every deterministic output
};

inline GlobalPlan PlanGlobal(const GlobalPlanRequest& req) {
  const auto t0 = std::chrono::steady_clock::now();
  GlobalPlan plan;
  plan.cut = PlanPhase2(req.cut);
  if (!plan.cut.report.AllPassed()) {
    throw InfeasibleError("cutting pass failed validation");
  }

  std::vector<Vec4> via;
  for (const Vec3& l : plan.cut.via_lengths) {
    Vec4 q;
    q << req.dig_swing_rad, l;
    via.push_back(q);
  }
  plan.pieces.cut = TimeParameterizePhase2(via, req.cut.limits, req.utilization);
  const CylinderState cut_start = plan.pieces.cut.points.empty()
                                      ? CylinderState{via.front(), Vec4::Zero()}
                                      : plan.pieces.cut.At(0.0);
  const CylinderState cut_end = plan.pieces.cut.points.empty()
                                    ? CylinderState{via.back(), Vec4::Zero()}
                                    : plan.pieces.cut.At(plan.pieces.cut.duration());

  Phase13Problem approach = req.free_motion;
  approach.model = req.cut.model;
  approach.limits = req.cut.limits;
  approach.phase = 1;
  approach.boundary = {req.start, Vec4::Zero(), cut_start.q, cut_start.qd};
  plan.approach = PlanPhase13(approach);

  // A bucket curled past the full-capacity angle holds everything; short of
  // it, the carry must not open beyond the angle the cut ended at.
  Phase13Problem carry = req.free_motion;
  carry.model = req.cut.model;
  carry.limits = req.cut.limits;
  carry.phase = 3;
  carry.boundary = {cut_end.q, cut_end.qd, req.dump, Vec4::Zero()};
  carry.theta_min = std::min(plan.cut.path.back().theta, req.cut.capacity.theta_full);
  plan.carry_theta_floor = carry.theta_min;
  plan.carry = PlanPhase13(carry);

  plan.pieces.approach = plan.approach.curve;
  plan.pieces.carry = plan.carry.curve;
  plan.trajectory = AssembleGlobal(plan.pieces, req.dt);
  plan.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return plan;
}

/// Human-readable planning summary. Wall time is left out so the report is
/// reproducible; callers print it separately.
inline void WritePlanReport(std::ostream& os, const GlobalPlan& p) {
  const char* branch = p.cut.volume.active == VolumeBranch::kCapacity ? "capacity" : "swept";
  os << "phase2.cost " << p.cut.cost << "\n"
     << "phase2.seed_cost " << p.cut.seed_cost << "\n"
     << "phase2.travel " << p.cut.travel << "\n"
     << "phase2.volume_per_width_m2 " << p.cut.volume.value << "\n"
     << "phase2.swept_per_width_m2 " << p.cut.volume.swept << "\n"
     << "phase2.capacity_per_width_m2 " << p.cut.volume.capacity << "\n"
     << "phase2.active_branch " << branch << "\n"
     << "phase2.status " << ToString(p.cut.diagnostics.status) << "\n"
     << "phase2.outer_iterations " << p.cut.diagnostics.outer_iterations << "\n"
     << "phase2.inner_iterations " << p.cut.diagnostics.inner_iterations << "\n";
  for (int c = 0; c < kNumPhase2Checks; ++c) {
    os << "phase2.violation." << kPhase2CheckNames[c] << " " << p.cut.report.violation[c] << "\n";
  }
  os << "phase2.duration_s " << p.pieces.cut.duration() << "\n";
  for (const auto* s : {&p.approach, &p.carry}) {
    const char* name = s == &p.approach ? "phase1" : "phase3";
    os << name << ".cost " << s->cost << "\n"
       << name << ".seed_cost " << s->seed_cost << "\n"
       << name << ".duration_s " << s->curve.duration << "\n"
       << name << ".status " << ToString(s->diagnostics.status) << "\n"
       << name << ".feasible " << (s->diagnostics.feasible ? 1 : 0) << "\n";
  }
  os << "phase3.theta_floor_rad " << p.carry_theta_floor << "\n"
     << "phase3.theta_sample_violation_rad " << p.carry.theta_sample_violation << "\n"
     << "global.duration_s " << p.trajectory.duration << "\n"
     << "global.samples " << p.trajectory.size() << "\n"
     << "global.junction_residual " << std::max(p.trajectory.junction_residual[0],
                                                p.trajectory.junction_residual[1])
     << "\n";
}

}  // namespace digplan
