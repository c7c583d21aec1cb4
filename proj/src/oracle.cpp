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

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ibc/projection.hpp"
#include "ibc/solver.hpp"

namespace ibc {

// Exhaustive enumeration over per-(section, control-step) sharing grids.
// Each grid point is pushed through the CTM (no holding-back possible) and
// the cost function is evaluated exactly, so the result is an independent
// reference optimum for desk-scale instances.
GridOracleResult grid_oracle(const Scenario& s, double grid_step, std::int64_t max_evals) {
  if (!(grid_step > 0.0)) throw std::invalid_argument("grid_step must be > 0");
  const int n = s.n();
  const int Kc = s.Kc();
  const int dims = n * Kc;

  // Per-dimension grids within the sharing bounds.
  std::vector<std::vector<double>> grids(dims);
  double total_log = 0.0;
  for (int d = 0; d < dims; ++d) {
    const int i = d % n;
    double lo = s.control.eps_min[i];
    double hi = s.control.eps_max[i];
    std::vector<double>& g = grids[d];
    for (double v = lo; v < hi - 1e-12; v += grid_step) g.push_back(v);
    g.push_back(hi);
    total_log += std::log10(static_cast<double>(g.size()));
  }
  if (total_log > std::log10(static_cast<double>(max_evals)))
    throw std::invalid_argument("grid oracle instance too large");

  ProjectedDemands projected = project_demands(s);

  GridOracleResult best;
  best.best_objective = std::numeric_limits<double>::infinity();

  std::vector<int> idx(dims, 0);
  Eigen::MatrixXd eps(n, Kc);
  while (true) {
    for (int d = 0; d < dims; ++d) eps(d % n, d / n) = grids[d][idx[d]];
    SharingPlan plan = SharingPlan::from_decisions(s, eps);
    TrafficTrajectory traj = simulate(s, plan);
    double j = evaluate_objective(s, projected, plan, traj);
    ++best.evaluations;
    if (j < best.best_objective) {
      best.best_objective = j;
      best.best_eps = eps;
    }

    int d = 0;
    while (d < dims && ++idx[d] == static_cast<int>(grids[d].size())) {
      idx[d] = 0;
      ++d;
    }
    if (d == dims) break;
  }
  return best;
}

HoldingBackReport detect_holding_back(const Scenario& s, const ExtractedSolution& sol,
                                      double tol) {
  const int n = s.n();
  const int K = s.K();
  const FdParams& fd = s.fd;
  const double lam_d = s.control.lambda_d;
  const double lam_r = s.control.lambda_r;
  const double g = lam_d * fd.q_cap / (fd.rho_cr - fd.rho_max);

  HoldingBackReport report;
  const TrafficTrajectory& traj = sol.qp_traj;

  for (int k = 0; k < K; ++k) {
    const int kc = k / s.control.steps_per_ctrl;
    for (int i = 1; i <= n; ++i) {
      // Direction a: q_i bounded by its own demand branches and, for i < n,
      // the downstream supply branches.
      {
        double rho = traj.rho_a(i - 1, k);
        double ea = sol.eps_a_raw(i - 1, kc);
        double bound = std::min(fd.v_f * rho, ea * fd.q_cap + g * (rho - ea * fd.rho_cr));
        if (i < n) {
          double bw = 1.0 - s.highway.exit_rate_a[i];
          double ramp = lam_r * s.demands.ramp_a[i][k];
          double ea1 = sol.eps_a_raw(i, kc);
          double rho1 = traj.rho_a(i, k);
          bound = std::min(bound, fd.w_s * (ea1 * fd.rho_max - rho1) / bw - ramp);
          bound = std::min(bound, ea1 * fd.q_cap / bw - ramp);
        }
        double slack = bound - traj.q_a(i, k);
        report.max_slack = std::max(report.max_slack, slack);
        if (slack > tol) report.flags.push_back({'a', i, k, slack});
      }
      {
        double rho = traj.rho_b(i - 1, k);
        double eb = sol.eps_b_raw(i - 1, kc);
        double bound = std::min(fd.v_f * rho, eb * fd.q_cap + g * (rho - eb * fd.rho_cr));
        if (i > 1) {
          double bw = 1.0 - s.highway.exit_rate_b[i - 2];
          double ramp = lam_r * s.demands.ramp_b[i - 2][k];
          double eb1 = sol.eps_b_raw(i - 2, kc);
          double rho1 = traj.rho_b(i - 2, k);
          bound = std::min(bound, fd.w_s * (eb1 * fd.rho_max - rho1) / bw - ramp);
          bound = std::min(bound, eb1 * fd.q_cap / bw - ramp);
        }
        double slack = bound - traj.q_b(i - 1, k);
        report.max_slack = std::max(report.max_slack, slack);
        if (slack > tol) report.flags.push_back({'b', i, k, slack});
      }
    }
  }
  return report;
}

}  // namespace ibc
