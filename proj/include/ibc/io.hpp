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

#ifndef IBC_IO_HPP_
#define IBC_IO_HPP_

#include <iosfwd>
#include <string>

#include "ibc/analysis.hpp"
#include "ibc/ctm.hpp"
#include "ibc/projection.hpp"

namespace ibc {

/// Shortest round-trippable decimal representation of a double. All file
/// formats use this so that reruns produce bitwise-identical output.
std::string format_double(double v);

/// Trajectory export. Columns: k,section,direction,rho,rel_rho,q,eps_applied.
/// Rows cover k = 0..K; the q cell of the k = K rows is empty (no flow step
/// starts at the horizon end). q is the section's exit flow during [k, k+1).
void write_trajectory_csv(const TrafficTrajectory& traj, const SharingPlan& plan,
                          const Scenario& s, std::ostream& os);

/// Trajectory summary: key,value rows (tts, origin-queue diagnostics,
/// warning count) followed by one `warning,<text>` row per warning.
void write_trajectory_summary(const TrafficTrajectory& traj, std::ostream& os);

/// Margin series for one section (plot-ready): columns k_c,d_a,d_b,d_total,
/// q_cap,cap_a,cap_b,bottleneck. cap columns are empty without a plan.
void write_margins_csv(const MarginSeries& m, int section, std::ostream& os);

/// Plan file. Columns: section,k_c,eps; rows ordered by section, then k_c.
void write_plan_csv(const SharingPlan& plan, std::ostream& os);

/// Reads a plan file (decided eps only; applied factors are re-derived).
Eigen::MatrixXd read_plan_csv(std::istream& is, const Scenario& s);

/// Relative-density grid: columns k,rel_1..rel_n (one file per direction).
void write_density_grid_csv(const Eigen::MatrixXd& rel, std::ostream& os);

/// Congested-cell mask, same shape as the density grid.
void write_mask_csv(const Eigen::Matrix<int, -1, -1>& mask, std::ostream& os);

/// Sharing surface: columns k_c,eps_1..eps_n.
void write_eps_surface_csv(const EpsSurface& surface, std::ostream& os);

/// Comparison table (stable column order, documented in the README).
void write_report_csv(const AnalysisReport& report, std::ostream& os);

}  // namespace ibc

#endif  // IBC_IO_HPP_
