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

#ifndef IBC_ANALYSIS_HPP_
#define IBC_ANALYSIS_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ibc/ctm.hpp"
#include "ibc/projection.hpp"
#include "ibc/qp.hpp"
#include "ibc/solver.hpp"

namespace ibc {

/// One scenario/variant comparison: no-control simulation vs. QP optimum vs.
/// CTM re-simulation under the QP sharing factors.
struct CompareRow {
  std::string scenario_label;
  bool capacity_drop = false;
  double no_control_tts = 0.0;
  double qp_tts = 0.0;   ///< TTS term of the QP solution
  double sim_tts = 0.0;  ///< TTS of the CTM fed with the QP sharing factors
  double improvement_qp_pct = 0.0;
  double improvement_sim_pct = 0.0;
  int holding_back_count = 0;
  double holding_back_max_slack = 0.0;
  int bottleneck_count = 0;
  int solver_iterations = 0;
  double solve_time_s = 0.0;
};

struct AnalysisReport {
  std::vector<CompareRow> rows;
};

/// Full per-variant result bundle kept around for exports.
struct VariantResult {
  Scenario scenario;  ///< with the variant's capacity-drop parameters applied
  CompareRow row;
  SharingPlan no_control_plan;
  TrafficTrajectory no_control_traj;
  QpSolution solution;
  ExtractedSolution extracted;
  TrafficTrajectory controlled_traj;
  ProjectedDemands projected;
  MarginSeries margins;
  HoldingBackReport holding_back;
};

/// Applies a capacity-drop variant: `on` keeps the scenario's stored
/// lambda_d/lambda_r; `off` forces (0, 1).
Scenario with_capacity_drop(const Scenario& s, bool on);

/// Runs the full pipeline for one scenario variant.
VariantResult run_variant(const Scenario& s, bool capacity_drop,
                          const SolverSettings& settings = {});

/// Runs both requested variants and assembles the comparison table.
AnalysisReport compare(const Scenario& s, bool drop_on, bool drop_off,
                       const SolverSettings& settings = {});

/// Relative-density field of a trajectory plus the congested-cell mask
/// (relative density > 1).
struct DensityField {
  Eigen::MatrixXd rel_a, rel_b;                    ///< n x K
  Eigen::Matrix<int, -1, -1> mask_a, mask_b;       ///< 1 where congested
  int congested_cells_a = 0, congested_cells_b = 0;
};

DensityField density_field(const TrafficTrajectory& traj, const Scenario& s);

/// First/last model step at which a section's relative density exceeds 1,
/// or (-1, -1) if it never does.
struct CongestionWindow {
  int onset = -1;
  int dissolution = -1;
};

CongestionWindow congestion_window(const DensityField& field, char direction, int section);

/// Space-time sharing surface with smoothness diagnostics (the targets of
/// the w2/w3 penalties).
struct EpsSurface {
  Eigen::MatrixXd eps;          ///< n x Kc
  double max_delta_time = 0.0;  ///< max |eps(kc) - eps(kc-1)|
  double max_delta_space = 0.0; ///< max |eps_i - eps_{i-1}|
};

EpsSurface eps_surface(const SharingPlan& plan);

}  // namespace ibc

#endif  // IBC_ANALYSIS_HPP_
