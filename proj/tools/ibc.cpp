/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "ibc/analysis.hpp"
#include "ibc/io.hpp"
#include "ibc/solver.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;   // parse/validation problems
constexpr int kExitSolver = 2;    // solver failure
constexpr int kExitStrict = 3;    // --strict invariant violation

struct OutputDir {
  fs::path root;
  std::vector<std::string> files;

  explicit OutputDir(const std::string& dir) : root(dir) { fs::create_directories(root); }

  std::ofstream open(const std::string& name) {
    files.push_back(name);
    std::ofstream out(root / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (root / name).string());
    return out;
  }

  void write_manifest() {
    std::ofstream out(root / "manifest.txt", std::ios::binary);
    for (const auto& f : files) out << f << "\n";
    out << "manifest.txt\n";
  }
};

std::string default_out_root() {
  if (const char* env = std::getenv("IBC_OUT_ROOT")) return env;
  return "out";
}

ibc::SolverSettings settings_from(double eps_abs, double eps_rel, int max_iter, bool polish) {
  ibc::SolverSettings st;
  st.eps_abs = eps_abs;
  st.eps_rel = eps_rel;
  st.max_iter = max_iter;
  st.polish = polish;
  return st;
}

void export_variant(const ibc::VariantResult& vr, OutputDir& out, const std::string& prefix) {
  const ibc::Scenario& s = vr.scenario;
  {
    auto f = out.open(prefix + "_plan.csv");
    ibc::write_plan_csv(vr.extracted.plan, f);
  }
  {
    auto f = out.open(prefix + "_trajectory.csv");
    ibc::write_trajectory_csv(vr.controlled_traj, vr.extracted.plan, s, f);
  }
  {
    auto f = out.open(prefix + "_summary.csv");
    ibc::write_trajectory_summary(vr.controlled_traj, f);
  }
  {
    auto f = out.open(prefix + "_solution.txt");
    ibc::dump_solution(vr.solution, f);
  }
  {
    ibc::EpsSurface surf = ibc::eps_surface(vr.extracted.plan);
    auto f = out.open(prefix + "_eps_surface.csv");
    ibc::write_eps_surface_csv(surf, f);
    auto d = out.open(prefix + "_eps_diagnostics.csv");
    d << "key,value\n";
    d << "max_delta_time," << ibc::format_double(surf.max_delta_time) << "\n";
    d << "max_delta_space," << ibc::format_double(surf.max_delta_space) << "\n";
  }
  {
    ibc::DensityField field = ibc::density_field(vr.controlled_traj, s);
    auto fa = out.open(prefix + "_relden_a.csv");
    ibc::write_density_grid_csv(field.rel_a, fa);
    auto fb = out.open(prefix + "_relden_b.csv");
    ibc::write_density_grid_csv(field.rel_b, fb);
    auto ma = out.open(prefix + "_congested_a.csv");
    ibc::write_mask_csv(field.mask_a, ma);
    auto mb = out.open(prefix + "_congested_b.csv");
    ibc::write_mask_csv(field.mask_b, mb);
  }
  {
    auto f = out.open(prefix + "_holding_back.csv");
    f << "direction,section,k,slack\n";
    for (const auto& flag : vr.holding_back.flags)
      f << flag.direction << "," << flag.section << "," << flag.k << ","
        << ibc::format_double(flag.slack) << "\n";
  }
  {
    // Margin windows with the optimized capacity split overlaid.
    ibc::MarginSeries margins =
        ibc::supply_demand_margins(s, vr.projected, &vr.extracted.plan);
    for (int i = 1; i <= s.n(); ++i) {
      auto f = out.open(prefix + "_margins_s" + std::to_string(i) + ".csv");
      ibc::write_margins_csv(margins, i, f);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal space-time capacity sharing for a bidirectional lane-free highway"};
  app.require_subcommand(1);

  std::string scenario_arg;
  std::string out_dir = default_out_root();
  std::string drop_arg = "on";
  std::string plan_path;
  ibc::SolverSettings defaults;
  double eps_abs = defaults.eps_abs, eps_rel = defaults.eps_rel;
  int max_iter = defaults.max_iter;
  bool no_polish = false;
  bool strict = false;
  std::vector<std::string> report_scenarios;

  auto add_common = [&](CLI::App* cmd, bool with_drop = true) {
    cmd->add_option("--scenario", scenario_arg, "scenario config path or builtin name")
        ->required();
    cmd->add_option("--out", out_dir, "output directory");
    if (with_drop)
      cmd->add_option("--capacity-drop", drop_arg, "on|off")
          ->check(CLI::IsMember({"on", "off"}));
  };
  auto add_solver_opts = [&](CLI::App* cmd) {
    cmd->add_option("--eps-abs", eps_abs, "solver absolute tolerance");
    cmd->add_option("--eps-rel", eps_rel, "solver relative tolerance");
    cmd->add_option("--max-iter", max_iter, "solver iteration cap");
    cmd->add_flag("--no-polish", no_polish, "skip active-set polish");
  };

  CLI::App* cmd_check = app.add_subcommand("check", "validate a scenario config");
  cmd_check->add_option("--scenario", scenario_arg, "scenario config path or builtin name")
      ->required();

  CLI::App* cmd_simulate =
      app.add_subcommand("simulate", "forward CTM simulation (no-control unless --plan)");
  add_common(cmd_simulate);
  cmd_simulate->add_option("--plan", plan_path, "sharing plan CSV from a prior optimize run");

  CLI::App* cmd_project = app.add_subcommand("project", "projected demands and margins");
  add_common(cmd_project, false);

  CLI::App* cmd_optimize = app.add_subcommand("optimize", "assemble and solve the QP");
  add_common(cmd_optimize);
  add_solver_opts(cmd_optimize);

  CLI::App* cmd_report = app.add_subcommand("report", "TTS comparison table");
  cmd_report->add_option("--scenario", report_scenarios, "scenario(s) to compare")->required();
  cmd_report->add_option("--out", out_dir, "output directory");
  cmd_report->add_option("--capacity-drop", drop_arg, "on|off|both")
      ->check(CLI::IsMember({"on", "off", "both"}));
  cmd_report->add_flag("--strict", strict, "nonzero exit if a report invariant fails");
  add_solver_opts(cmd_report);

  CLI::App* cmd_dump = app.add_subcommand("dump", "QP problem in the text interchange format");
  add_common(cmd_dump);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_check->parsed()) {
      try {
        ibc::Scenario s = ibc::load_scenario(scenario_arg);
        std::cout << "ok: " << (s.label.empty() ? scenario_arg : s.label) << " (n=" << s.n()
                  << ", K=" << s.K() << ", K_c=" << s.Kc() << ")\n";
        return kExitOk;
      } catch (const ibc::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitInvalid;
      } catch (const ibc::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitInvalid;
      }
    }

    if (cmd_simulate->parsed()) {
      ibc::Scenario s =
          ibc::with_capacity_drop(ibc::load_scenario(scenario_arg), drop_arg == "on");
      ibc::SharingPlan plan = ibc::SharingPlan::constant(s, 0.5);
      if (!plan_path.empty()) {
        std::ifstream in(plan_path);
        if (!in) throw std::runtime_error("cannot open plan file: " + plan_path);
        plan = ibc::SharingPlan::from_decisions(s, ibc::read_plan_csv(in, s));
      }
      ibc::TrafficTrajectory traj = ibc::simulate(s, plan);
      OutputDir out(out_dir);
      {
        auto f = out.open("trajectory.csv");
        ibc::write_trajectory_csv(traj, plan, s, f);
      }
      {
        auto f = out.open("summary.csv");
        ibc::write_trajectory_summary(traj, f);
      }
      {
        ibc::DensityField field = ibc::density_field(traj, s);
        auto fa = out.open("relden_a.csv");
        ibc::write_density_grid_csv(field.rel_a, fa);
        auto fb = out.open("relden_b.csv");
        ibc::write_density_grid_csv(field.rel_b, fb);
        auto ma = out.open("congested_a.csv");
        ibc::write_mask_csv(field.mask_a, ma);
        auto mb = out.open("congested_b.csv");
        ibc::write_mask_csv(field.mask_b, mb);
      }
      out.write_manifest();
      std::cout << "tts " << ibc::format_double(traj.tts) << "\n";
      for (const auto& w : traj.warnings) std::cout << "warning: " << w << "\n";
      return kExitOk;
    }

    if (cmd_project->parsed()) {
      ibc::Scenario s = ibc::load_scenario(scenario_arg);
      ibc::ProjectedDemands p = ibc::project_demands(s);
      ibc::MarginSeries m = ibc::supply_demand_margins(s, p, nullptr);
      OutputDir out(out_dir);
      for (int i = 1; i <= s.n(); ++i) {
        auto f = out.open("margins_s" + std::to_string(i) + ".csv");
        ibc::write_margins_csv(m, i, f);
      }
      out.write_manifest();
      std::cout << "bottleneck_flags " << m.bottlenecks.size() << "\n";
      return kExitOk;
    }

    if (cmd_optimize->parsed()) {
      ibc::Scenario s =
          ibc::with_capacity_drop(ibc::load_scenario(scenario_arg), drop_arg == "on");
      ibc::VariantResult vr = ibc::run_variant(
          s, drop_arg == "on", settings_from(eps_abs, eps_rel, max_iter, !no_polish));
      if (vr.solution.status != ibc::SolveStatus::Optimal) {
        std::cerr << "solver did not reach optimality: " << to_string(vr.solution.status)
                  << "\n";
        return kExitSolver;
      }
      OutputDir out(out_dir);
      export_variant(vr, out, "optimize");
      out.write_manifest();
      std::cout << "qp_tts " << ibc::format_double(vr.row.qp_tts) << "\n";
      std::cout << "sim_tts " << ibc::format_double(vr.row.sim_tts) << "\n";
      std::cout << "no_control_tts " << ibc::format_double(vr.row.no_control_tts) << "\n";
      std::cout << "holding_back_flags " << vr.row.holding_back_count << "\n";
      std::cout << "iterations " << vr.solution.iterations << "\n";
      std::cout << "solve_time_s " << ibc::format_double(vr.solution.solve_time_s) << "\n";
      return kExitOk;
    }

    if (cmd_report->parsed()) {
      ibc::AnalysisReport report;
      bool strict_ok = true;
      for (const std::string& name : report_scenarios) {
        ibc::Scenario s = ibc::load_scenario(name);
        ibc::AnalysisReport part =
            ibc::compare(s, drop_arg != "off", drop_arg != "on",
                         settings_from(eps_abs, eps_rel, max_iter, !no_polish));
        for (auto& row : part.rows) {
          if (row.sim_tts < row.qp_tts - 1e-6 * std::abs(row.qp_tts) - 1e-9) strict_ok = false;
          if (row.sim_tts > row.no_control_tts * (1.0 + 1e-6) + 1e-9) strict_ok = false;
          report.rows.push_back(row);
        }
      }
      OutputDir out(out_dir);
      {
        auto f = out.open("report.csv");
        ibc::write_report_csv(report, f);
      }
      out.write_manifest();
      ibc::write_report_csv(report, std::cout);
      if (strict && !strict_ok) {
        std::cerr << "strict mode: report invariants violated\n";
        return kExitStrict;
      }
      return kExitOk;
    }

    if (cmd_dump->parsed()) {
      ibc::Scenario s =
          ibc::with_capacity_drop(ibc::load_scenario(scenario_arg), drop_arg == "on");
      ibc::ProjectedDemands p = ibc::project_demands(s);
      ibc::QpProblem qp = ibc::build_qp(s, p);
      OutputDir out(out_dir);
      {
        auto f = out.open("problem.txt");
        ibc::dump_problem(qp, f);
      }
      out.write_manifest();
      std::cout << "vars " << qp.index_map.total_vars << " eq " << qp.row_map.n_eq
                << " ineq " << qp.row_map.n_ineq << "\n";
      return kExitOk;
    }
  } catch (const ibc::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ibc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitInvalid;
}
