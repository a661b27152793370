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

// digplan: plan, run, check and oracle subcommands.
//
// Exit codes: 0 ok, 1 other failure, 2 config error, 3 planning infeasible,
// 4 simulation diverged.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "digplan/harness/config.hpp"
#include "digplan/harness/run.hpp"
#include "oracles/oracle_suite.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::vector<std::string> configs;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

std::ofstream OpenOut(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

digplan::ScenarioConfig Load(const Options& o) {
  if (o.configs.size() != 1) throw digplan::ConfigError("--config", "expected exactly one file");
  digplan::ScenarioConfig cfg = digplan::LoadScenario(o.configs.front());
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

int Check(const Options& o) {
  if (o.configs.empty()) throw digplan::ConfigError("--config", "no file given");
  std::set<std::string> names;
  for (const std::string& path : o.configs) {
    const digplan::ScenarioConfig cfg = digplan::LoadScenario(path);
    if (!names.insert(cfg.name).second) {
      throw digplan::ConfigError("name", "duplicate scenario name " + cfg.name);
    }
    if (!o.quiet) std::cout << "ok " << cfg.name << " (" << path << ")\n";
  }
  return 0;
}

int Plan(const Options& o) {
  const digplan::ScenarioConfig cfg = Load(o);
  const digplan::GlobalPlan plan = digplan::PlanGlobal(cfg.plan);
  const fs::path out(o.out);
  fs::create_directories(out);
  {
    std::ofstream f = OpenOut(out / "trajectory.csv");
    digplan::WriteTrajectoryCsv(f, plan.trajectory);
  }
  {
    std::ofstream f = OpenOut(out / "plan_report.txt");
    digplan::WritePlanReport(f, plan);
  }
  {
    std::ofstream f = OpenOut(out / "timing.json");
    f << nlohmann::ordered_json{{"global_plan_s", plan.wall_time_s}}.dump(2) << '\n';
  }
  if (!o.quiet) {
    digplan::WritePlanReport(std::cout, plan);
    std::cout << "wall_time_s " << plan.wall_time_s << "\n";
  }
  return 0;
}

int Run(const Options& o) {
  const digplan::ScenarioConfig cfg = Load(o);
  const digplan::RunResult r = digplan::RunScenario(cfg);
  const fs::path out(o.out);
  fs::create_directories(out);
  {
    std::ofstream f = OpenOut(out / "trajectory.csv");
    digplan::WriteTrajectoryCsv(f, r.plan.trajectory);
  }
  {
    std::ofstream f = OpenOut(out / "plan_report.txt");
    digplan::WritePlanReport(f, r.plan);
  }
  {
    std::ofstream f = OpenOut(out / "run.csv");
    digplan::WriteRunCsv(f, r, cfg.limits());
  }
  {
    std::ofstream f = OpenOut(out / "plant_truth.csv");
    digplan::WriteTruthCsv(f, r);
  }
  {
    std::ofstream f = OpenOut(out / "report.txt");
    digplan::WriteReportText(f, r.report);
  }
  {
    std::ofstream f = OpenOut(out / "report.json");
    f << digplan::ReportJson(r.report).dump(2) << '\n';
  }
  {
    std::ofstream f = OpenOut(out / "timing.json");
    f << digplan::TimingJson(r.timing).dump(2) << '\n';
  }
  if (!o.quiet) {
    digplan::WriteReportText(std::cout, r.report);
    const digplan::RunTiming& t = r.timing;
    std::printf("timing global_plan_s %.3f local_mean_ms %.2f local_max_ms %.2f total_s %.2f\n",
                t.global_plan_s, t.local_mean_ms, t.local_max_ms, t.total_s);
    if (t.local_mean_ms > 1e3 * cfg.mpc.dt) {
      std::printf("warning: mean local solve exceeds the %.0f ms control period\n",
                  1e3 * cfg.mpc.dt);
    }
    if (t.local_overruns > 0) {
      std::printf("note: %d local solves exceeded the control period\n", t.local_overruns);
    }
  }
  return 0;
}

int Oracle(const Options& o) {
  const auto checks = digplan::oracle::RunOracleSuite();
  int failed = 0;
  double total = 0.0;
  for (const auto& c : checks) {
    failed += c.passed ? 0 : 1;
    total += c.seconds;
    if (!o.quiet || !c.passed) {
      std::printf("%s  %-40s value %-12.4g bound %-10.3g (%.2f s)\n", c.passed ? "PASS" : "FAIL",
                  c.name.c_str(), c.value, c.bound, c.seconds);
    }
  }
  std::printf("%d/%zu oracle checks passed in %.1f s\n", static_cast<int>(checks.size()) - failed,
              checks.size(), total);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Excavator dig planning and simulation"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool outputs) {
    sub->add_option("--config", o.configs, "Scenario file")->check(CLI::ExistingFile);
    if (outputs) sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Seed override");
    sub->add_flag("--quiet", o.quiet, "Print only errors");
  };
  CLI::App* plan = app.add_subcommand("plan", "Global plan only; writes trajectory.csv");
  CLI::App* run = app.add_subcommand("run", "Full closed loop; writes CSV logs and reports");
  CLI::App* check = app.add_subcommand("check", "Validate one or more scenario files");
  CLI::App* oracle = app.add_subcommand("oracle", "Run the oracle suite");
  common(plan, true);
  common(run, true);
  common(check, false);
  oracle->add_flag("--quiet", o.quiet, "Print only failures and the summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*plan) return Plan(o);
    if (*run) return Run(o);
    if (*check) return Check(o);
    if (*oracle) return Oracle(o);
  } catch (const digplan::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const digplan::InfeasibleError& e) {
    std::cerr << "planning infeasible: " << e.what() << "\n";
    return 3;
  } catch (const digplan::ContinuityError& e) {
    std::cerr << "planning infeasible: " << e.what() << "\n";
    return 3;
  } catch (const digplan::DivergenceError& e) {
    std::cerr << "simulation diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
