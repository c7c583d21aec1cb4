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

#include "ibc/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ibc {

std::string format_double(double v) {
  char buf[64];
  // Integral values print without exponent or trailing digits.
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  // Otherwise the shortest representation that parses back to the same bits.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trajectory_csv(const TrafficTrajectory& traj, const SharingPlan& plan,
                          const Scenario& s, std::ostream& os) {
  os << "k,section,direction,rho,rel_rho,q,eps_applied\n";
  const int n = s.n(), K = s.K();
  for (int k = 0; k <= K; ++k) {
    const int kc = ctrl_index(s, k);
    for (int i = 0; i < n; ++i) {
      os << k << "," << (i + 1) << ",a," << format_double(traj.rho_a(i, k)) << ",";
      if (k >= 1)
        os << format_double(traj.rel_a(i, k - 1));
      else
        os << format_double(traj.rho_a(i, 0) / (plan.eps_a(i, 0) * s.fd.rho_cr));
      os << ",";
      if (k < K) os << format_double(traj.q_a(i + 1, k));
      os << "," << format_double(plan.eps_a(i, kc)) << "\n";
    }
    for (int i = 0; i < n; ++i) {
      os << k << "," << (i + 1) << ",b," << format_double(traj.rho_b(i, k)) << ",";
      if (k >= 1)
        os << format_double(traj.rel_b(i, k - 1));
      else
        os << format_double(traj.rho_b(i, 0) / (plan.eps_b(i, 0) * s.fd.rho_cr));
      os << ",";
      if (k < K) os << format_double(traj.q_b(i, k));
      os << "," << format_double(plan.eps_b(i, kc)) << "\n";
    }
  }
}

void write_trajectory_summary(const TrafficTrajectory& traj, std::ostream& os) {
  os << "key,value\n";
  os << "tts," << format_double(traj.tts) << "\n";
  os << "origin_queue_a_final," << format_double(traj.origin_queue_a_final) << "\n";
  os << "origin_queue_b_final," << format_double(traj.origin_queue_b_final) << "\n";
  os << "origin_queue_a_max," << format_double(traj.origin_queue_a_max) << "\n";
  os << "origin_queue_b_max," << format_double(traj.origin_queue_b_max) << "\n";
  os << "warning_count," << traj.warnings.size() << "\n";
  for (const std::string& w : traj.warnings) os << "warning," << w << "\n";
}

void write_margins_csv(const MarginSeries& m, int section, std::ostream& os) {
  os << "k_c,d_a,d_b,d_total,q_cap,cap_a,cap_b,bottleneck\n";
  const int i = section - 1;
  for (int kc = 0; kc < m.d_a.cols(); ++kc) {
    os << kc << "," << format_double(m.d_a(i, kc)) << "," << format_double(m.d_b(i, kc))
       << "," << format_double(m.d_total(i, kc)) << "," << format_double(m.q_cap) << ",";
    if (m.has_plan)
      os << format_double(m.cap_a(i, kc)) << "," << format_double(m.cap_b(i, kc));
    else
      os << ",";
    os << "," << (m.d_total(i, kc) > m.q_cap ? 1 : 0) << "\n";
  }
}

void write_plan_csv(const SharingPlan& plan, std::ostream& os) {
  os << "section,k_c,eps\n";
  for (int i = 0; i < plan.eps.rows(); ++i)
    for (int kc = 0; kc < plan.eps.cols(); ++kc)
      os << (i + 1) << "," << kc << "," << format_double(plan.eps(i, kc)) << "\n";
}

Eigen::MatrixXd read_plan_csv(std::istream& is, const Scenario& s) {
  Eigen::MatrixXd eps(s.n(), s.Kc());
  Eigen::Matrix<int, -1, -1> seen = Eigen::Matrix<int, -1, -1>::Zero(s.n(), s.Kc());
  std::string line;
  if (!std::getline(is, line) || line.rfind("section,k_c,eps", 0) != 0)
    throw std::runtime_error("plan file must start with header section,k_c,eps");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    int section = 0, kc = 0;
    double v = 0.0;
    if (!std::getline(ss, cell, ',')) throw std::runtime_error("bad plan row");
    section = std::stoi(cell);
    if (!std::getline(ss, cell, ',')) throw std::runtime_error("bad plan row");
    kc = std::stoi(cell);
    if (!std::getline(ss, cell, ',')) throw std::runtime_error("bad plan row");
    v = std::strtod(cell.c_str(), nullptr);
    if (section < 1 || section > s.n() || kc < 0 || kc >= s.Kc())
      throw std::runtime_error("plan entry out of range at line " + std::to_string(lineno));
    eps(section - 1, kc) = v;
    seen(section - 1, kc) = 1;
  }
  if (seen.sum() != s.n() * s.Kc())
    throw std::runtime_error("plan file does not cover every (section, k_c) pair");
  return eps;
}

void write_density_grid_csv(const Eigen::MatrixXd& rel, std::ostream& os) {
  os << "k";
  for (int i = 0; i < rel.rows(); ++i) os << ",rel_" << (i + 1);
  os << "\n";
  for (int k = 0; k < rel.cols(); ++k) {
    os << (k + 1);
    for (int i = 0; i < rel.rows(); ++i) os << "," << format_double(rel(i, k));
    os << "\n";
  }
}

void write_mask_csv(const Eigen::Matrix<int, -1, -1>& mask, std::ostream& os) {
  os << "k";
  for (int i = 0; i < mask.rows(); ++i) os << ",congested_" << (i + 1);
  os << "\n";
  for (int k = 0; k < mask.cols(); ++k) {
    os << (k + 1);
    for (int i = 0; i < mask.rows(); ++i) os << "," << mask(i, k);
    os << "\n";
  }
}

void write_eps_surface_csv(const EpsSurface& surface, std::ostream& os) {
  os << "k_c";
  for (int i = 0; i < surface.eps.rows(); ++i) os << ",eps_" << (i + 1);
  os << "\n";
  for (int kc = 0; kc < surface.eps.cols(); ++kc) {
    os << kc;
    for (int i = 0; i < surface.eps.rows(); ++i)
      os << "," << format_double(surface.eps(i, kc));
    os << "\n";
  }
}

void write_report_csv(const AnalysisReport& report, std::ostream& os) {
  os << "scenario,capacity_drop,no_control_tts,qp_tts,sim_tts,improvement_qp_pct,"
        "improvement_sim_pct,holding_back_count,holding_back_max_slack,bottleneck_count,"
        "solver_iterations\n";
  for (const CompareRow& r : report.rows) {
    os << r.scenario_label << "," << (r.capacity_drop ? "on" : "off") << ","
       << format_double(r.no_control_tts) << "," << format_double(r.qp_tts) << ","
       << format_double(r.sim_tts) << "," << format_double(r.improvement_qp_pct) << ","
       << format_double(r.improvement_sim_pct) << "," << r.holding_back_count << ","
       << format_double(r.holding_back_max_slack) << "," << r.bottleneck_count << ","
       << r.solver_iterations << "\n";
  }
}

}  // namespace ibc
