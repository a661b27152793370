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

// End-to-end acceptance: runs both bundled scenarios twice and the oracle
// suite, then prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "digplan/harness/config.hpp"
#include "digplan/harness/run.hpp"
#include "oracles/oracle_suite.hpp"

namespace {

using digplan::RunResult;

// Tolerances.
constexpr double kMaxPenetrationM = 1e-6;
constexpr double kMinFractionWithin = 0.80;
constexpr double kMaxScenarioS = 120.0;
constexpr double kMaxGlobalPlanS = 5.0;
constexpr double kMaxLocalMeanMs = 50.0;
constexpr double kMinResidual = -1e-3;
constexpr double kMaxOracleS = 60.0;

struct Outputs {
  std::string run_csv, truth_csv, report;
};

Outputs Serialize(const RunResult& r, const digplan::PhysicalLimits& lim) {
  std::ostringstream a, b, c;
  digplan::WriteRunCsv(a, r, lim);
  digplan::WriteTruthCsv(b, r);
  c << digplan::ReportJson(r.report).dump();
  return {a.str(), b.str(), c.str()};
}

struct Scenario {
  std::string name;
  RunResult first;
  bool identical = false;
  std::string error;
};

int failures = 0;

void Line(int criterion, bool ok, const std::string& text) {
  std::printf("CRITERION %d %s  %s\n", criterion, ok ? "PASS" : "FAIL", text.c_str());
  failures += ok ? 0 : 1;
}

std::string Fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

}  // namespace

int main() {
  const std::filesystem::path dir = std::filesystem::path(DIGPLAN_CONFIG_DIR) / "scenarios";
  std::vector<Scenario> runs;
  for (const char* name : {"shallow", "deep"}) {
    Scenario s;
    s.name = name;
    try {
      const digplan::ScenarioConfig cfg = digplan::LoadScenario(dir / (s.name + ".json"));
      s.first = digplan::RunScenario(cfg);
      const RunResult second = digplan::RunScenario(cfg);
      const Outputs a = Serialize(s.first, cfg.limits()), b = Serialize(second, cfg.limits());
      s.identical = a.run_csv == b.run_csv && a.truth_csv == b.truth_csv && a.report == b.report;
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    runs.push_back(std::move(s));
  }
  for (const Scenario& s : runs) {
    if (!s.error.empty()) std::printf("  %s failed: %s\n", s.name.c_str(), s.error.c_str());
  }
  const Scenario& sh = runs[0];
  const Scenario& dp = runs[1];
  const bool both = sh.error.empty() && dp.error.empty();

  // 1. Qualitative reproduction and runtime.
  {
    bool ok = both;
    if (both) {
      const digplan::RunReport& a = sh.first.report;
      const digplan::RunReport& b = dp.first.report;
      std::printf("  shallow via-path penetration %.3g m, within 3 cm %.3f (sampled reference %.3g m, executed %.3g m)\n",
                  a.via_path.max_penetration_m, a.via_path.within_tolerance,
                  a.planned.max_penetration_m, a.executed.max_penetration_m);
      std::printf("  deep branch %s, V = %.4f m2 per width (swept %.4f, capacity %.4f)\n",
                  b.volume_branch.c_str(), b.volume_m2, b.swept_m2, b.capacity_m2);
      std::printf("  runtime shallow %.1f s, deep %.1f s\n", sh.first.timing.total_s,
                  dp.first.timing.total_s);
      std::printf("  peak soil force shallow %.0f N, deep %.0f N\n", a.peak_soil_force_n,
                  b.peak_soil_force_n);
      ok = a.via_path.max_penetration_m <= kMaxPenetrationM &&
           a.via_path.within_tolerance >= kMinFractionWithin && b.volume_branch == "capacity" &&
           sh.first.timing.total_s < kMaxScenarioS && dp.first.timing.total_s < kMaxScenarioS;
    }
    Line(1, ok, "shallow hugs target, deep capacity-active, runtime < 2 min");
  }

  // 2. Timing.
  {
    bool ok = both;
    for (const Scenario& s : runs) {
      if (!s.error.empty()) continue;
      const digplan::RunTiming& t = s.first.timing;
      std::printf("  %s global plan %.2f s, local mean %.2f ms (max %.1f ms, %d overruns)\n",
                  s.name.c_str(), t.global_plan_s, t.local_mean_ms, t.local_max_ms,
                  t.local_overruns);
      ok = ok && t.global_plan_s < kMaxGlobalPlanS && t.local_mean_ms < kMaxLocalMeanMs;
    }
    Line(2, ok, "global plan < 5 s, local mean < 50 ms");
  }

  // 3. Constraint satisfaction on plant truth.
  {
    bool ok = both;
    for (const Scenario& s : runs) {
      if (!s.error.empty()) continue;
      const digplan::RunReport& r = s.first.report;
      std::printf("  %s worst normalized residual: force %.3g power %.3g length %.3g flow %.3g\n",
                  s.name.c_str(), r.worst_residual[0], r.worst_residual[1], r.worst_residual[2],
                  r.worst_residual[3]);
      ok = ok && r.worst_residual_all >= kMinResidual;
    }
    Line(3, ok, Fmt("every residual >= %.0e on plant truth", kMinResidual));
  }

  // 4. Oracle suite.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto checks = digplan::oracle::RunOracleSuite();
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = total < kMaxOracleS;
    for (const auto& c : checks) {
      std::printf("  %s %-40s %.4g (bound %.3g)\n", c.passed ? "ok  " : "FAIL", c.name.c_str(),
                  c.value, c.bound);
      ok = ok && c.passed;
    }
    Line(4, ok, Fmt("oracle suite, %.1f s", total));
  }

  // 5. Determinism.
  {
    bool ok = both;
    for (const Scenario& s : runs) {
      std::printf("  %s second run %s\n", s.name.c_str(), s.identical ? "bit-identical" : "differs");
      ok = ok && s.identical;
    }
    Line(5, ok, "same seed gives bit-identical CSVs");
  }

  // Plant sanity on the same runs: deeper penetration, larger soil force.
  {
    const bool ok = both && dp.first.report.peak_soil_force_n > sh.first.report.peak_soil_force_n;
    std::printf("CHECK %s  deep peak soil force exceeds shallow peak\n", ok ? "PASS" : "FAIL");
    failures += ok ? 0 : 1;
  }

  std::printf("%d checks failed\n", failures);
  return failures == 0 ? 0 : 1;
}
