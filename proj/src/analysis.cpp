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

#include "ibc/analysis.hpp"

#include <cmath>
#include <stdexcept>

namespace ibc {

Scenario with_capacity_drop(const Scenario& s, bool on) {
  Scenario out = s;
  if (!on) {
    out.control.lambda_d = 0.0;
    out.control.lambda_r = 1.0;
  }
  return out;
}

VariantResult run_variant(const Scenario& base, bool capacity_drop,
                          const SolverSettings& settings) {
  VariantResult vr;
  vr.scenario = with_capacity_drop(base, capacity_drop);
  const Scenario& s = vr.scenario;

  vr.no_control_plan = SharingPlan::constant(s, 0.5);
  vr.no_control_traj = simulate(s, vr.no_control_plan);

  vr.projected = project_demands(s);
  vr.margins = supply_demand_margins(s, vr.projected, nullptr);

  QpProblem qp = build_qp(s, vr.projected);
  vr.solution = solve(qp, settings);
  if (vr.solution.status != SolveStatus::Optimal &&
      vr.solution.status != SolveStatus::MaxIter) {
    throw std::runtime_error(std::string("qp solve failed: ") + to_string(vr.solution.status));
  }
  vr.extracted = extract_solution(vr.solution.x, qp.index_map, s);
  vr.controlled_traj = simulate(s, vr.extracted.plan);
  vr.holding_back = detect_holding_back(s, vr.extracted);

  CompareRow& row = vr.row;
  row.scenario_label = base.label;
  row.capacity_drop = capacity_drop;
  row.no_control_tts = vr.no_control_traj.tts;
  row.qp_tts = vr.extracted.qp_tts;
  row.sim_tts = vr.controlled_traj.tts;
  row.improvement_qp_pct = 100.0 * (row.no_control_tts - row.qp_tts) / row.no_control_tts;
  row.improvement_sim_pct = 100.0 * (row.no_control_tts - row.sim_tts) / row.no_control_tts;
  row.holding_back_count = static_cast<int>(vr.holding_back.flags.size());
  row.holding_back_max_slack = vr.holding_back.max_slack;
  row.bottleneck_count = static_cast<int>(vr.margins.bottlenecks.size());
  row.solver_iterations = vr.solution.iterations;
  row.solve_time_s = vr.solution.solve_time_s;
  return vr;
}

AnalysisReport compare(const Scenario& s, bool drop_on, bool drop_off,
                       const SolverSettings& settings) {
  AnalysisReport report;
  if (drop_on) report.rows.push_back(run_variant(s, true, settings).row);
  if (drop_off) report.rows.push_back(run_variant(s, false, settings).row);
  return report;
}

DensityField density_field(const TrafficTrajectory& traj, const Scenario& s) {
  DensityField f;
  f.rel_a = traj.rel_a;
  f.rel_b = traj.rel_b;
  const int n = s.n(), K = s.K();
  f.mask_a.setZero(n, K);
  f.mask_b.setZero(n, K);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      if (f.rel_a(i, k) > 1.0) {
        f.mask_a(i, k) = 1;
        ++f.congested_cells_a;
      }
      if (f.rel_b(i, k) > 1.0) {
        f.mask_b(i, k) = 1;
        ++f.congested_cells_b;
      }
    }
  }
  return f;
}

CongestionWindow congestion_window(const DensityField& field, char direction, int section) {
  const auto& mask = direction == 'a' ? field.mask_a : field.mask_b;
  CongestionWindow w;
  for (int k = 0; k < mask.cols(); ++k) {
    if (mask(section - 1, k) != 0) {
      if (w.onset < 0) w.onset = k + 1;  // rel column k holds model step k+1
      w.dissolution = k + 1;
    }
  }
  return w;
}

EpsSurface eps_surface(const SharingPlan& plan) {
  EpsSurface surf;
  surf.eps = plan.eps;
  const int n = static_cast<int>(plan.eps.rows());
  const int Kc = static_cast<int>(plan.eps.cols());
  for (int kc = 1; kc < Kc; ++kc)
    for (int i = 0; i < n; ++i)
      surf.max_delta_time =
          std::max(surf.max_delta_time, std::abs(plan.eps(i, kc) - plan.eps(i, kc - 1)));
  for (int kc = 0; kc < Kc; ++kc)
    for (int i = 1; i < n; ++i)
      surf.max_delta_space =
          std::max(surf.max_delta_space, std::abs(plan.eps(i, kc) - plan.eps(i - 1, kc)));
  return surf;
}

}  // namespace ibc
