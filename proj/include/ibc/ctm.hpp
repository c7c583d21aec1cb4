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

#ifndef IBC_CTM_HPP_
#define IBC_CTM_HPP_

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "ibc/scenario.hpp"

namespace ibc {

/// Sharing factors per section and control step. `eps` holds the decided
/// factors; `eps_a`/`eps_b` hold the factors actually applied after the
/// one-control-step evacuation delay (min-rule).
struct SharingPlan {
  Eigen::MatrixXd eps;    ///< n x Kc, decided
  Eigen::MatrixXd eps_a;  ///< n x Kc, applied to direction a
  Eigen::MatrixXd eps_b;  ///< n x Kc, applied to direction b

  /// Constant-eps plan (the no-control case uses 0.5).
  static SharingPlan constant(const Scenario& s, double eps_value = 0.5);
  /// Builds a plan from decided factors, deriving eps_a/eps_b via the
  /// min-rule with eps(-1) = scenario eps_init. Clamps values to the
  /// scenario bounds (tolerating solver-level noise) and validates.
  static SharingPlan from_decisions(const Scenario& s, const Eigen::MatrixXd& eps);
};

/// Min-rule for the applied factors: the narrowing direction applies the new
/// width immediately, the widening one waits a control step.
std::pair<Eigen::VectorXd, Eigen::VectorXd> applied_sharing(
    const Eigen::VectorXd& eps_now, const Eigen::VectorXd& eps_prev);

/// Demand function of the scaled triangular FD, with optional capacity-drop
/// droop above the (scaled) critical density. Clamped at zero.
double demand_fn(double rho, double eps_dir, const FdParams& fd, double lambda_d);

/// Supply function of the scaled triangular FD. Clamped at zero.
double supply_fn(double rho, double eps_dir, const FdParams& fd);

/// Flows produced by one model step.
struct StepFlows {
  Eigen::VectorXd q_a;  ///< length n+1, q_a[i] = q_i^a, i = 0..n (q_0 = entry)
  Eigen::VectorXd q_b;  ///< length n+1, q_b[i-1] = q_i^b, i = 1..n+1 (q_{n+1} = entry)
};

/// External inflows at one model step.
struct StepExternals {
  double entry_a = 0.0;    ///< demanded q_0^a (veh/h)
  double entry_b = 0.0;    ///< demanded q_{n+1}^b (veh/h)
  Eigen::VectorXd ramp_a;  ///< length n
  Eigen::VectorXd ramp_b;  ///< length n
};

/// One conservation step over both directions. Entry flows equal the demanded
/// inflow unless the first section's supply would be violated, in which case
/// they are clamped to the supply bound (the caller accounts the excess).
StepFlows step(Eigen::VectorXd& rho_a, Eigen::VectorXd& rho_b,
               const Eigen::VectorXd& eps_a, const Eigen::VectorXd& eps_b,
               const StepExternals& ext, const Scenario& s);

/// Densities, flows, relative densities and TTS from a full rollout.
struct TrafficTrajectory {
  Eigen::MatrixXd rho_a;  ///< n x (K+1), column 0 = initial state
  Eigen::MatrixXd rho_b;  ///< n x (K+1)
  Eigen::MatrixXd q_a;    ///< (n+1) x K, row i = q_i^a, i = 0..n
  Eigen::MatrixXd q_b;    ///< (n+1) x K, row i-1 = q_i^b, i = 1..n+1
  Eigen::MatrixXd rel_a;  ///< n x K, relative density at k = 1..K
  Eigen::MatrixXd rel_b;  ///< n x K
  double tts = 0.0;       ///< total time spent (veh h)
  std::vector<std::string> warnings;

  // Origin-queue diagnostics (vehicles held outside the stretch when the
  // entry had to be clamped; not part of TTS).
  double origin_queue_a_final = 0.0;
  double origin_queue_b_final = 0.0;
  double origin_queue_a_max = 0.0;
  double origin_queue_b_max = 0.0;
};

/// Rolls `step` over k = 0..K-1 under the given plan. Model steps map to
/// control steps as k_c = floor(k*T/T_c).
TrafficTrajectory simulate(const Scenario& s, const SharingPlan& plan);

/// Total time spent: T * sum_{k=1..K} sum_i L_i (rho_i^a(k) + rho_i^b(k)).
double tts(const TrafficTrajectory& traj, const Scenario& s);

/// Control step in force at model step k, clamped to the horizon.
inline int ctrl_index(const Scenario& s, int k) {
  int kc = k / s.control.steps_per_ctrl;
  return kc < s.Kc() ? kc : s.Kc() - 1;
}

}  // namespace ibc

#endif  // IBC_CTM_HPP_
