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

#ifndef IBC_PROJECTION_HPP_
#define IBC_PROJECTION_HPP_

#include <Eigen/Dense>
#include <vector>

#include "ibc/ctm.hpp"
#include "ibc/scenario.hpp"

namespace ibc {

/// Projected (free-flow) demand per section and direction: the external
/// demands propagated through the stretch at free speed, with capacity
/// treated as unlimited. Independent of any sharing plan.
struct ProjectedDemands {
  Eigen::MatrixXd d_a;    ///< n x K, model-step values
  Eigen::MatrixXd d_b;    ///< n x K
  Eigen::MatrixXd dc_a;   ///< n x Kc, per-control-step means
  Eigen::MatrixXd dc_b;   ///< n x Kc
  Eigen::MatrixXd dcf_a;  ///< n x Kc, floored at d_floor (used by the objective)
  Eigen::MatrixXd dcf_b;  ///< n x Kc
};

ProjectedDemands project_demands(const Scenario& s);

/// Sharing factor that balances the capacity reserves of the two directions:
/// eps = d_a / (d_a + d_b), clipped to [eps_min, eps_max].
double reserve_balanced_eps(double d_a, double d_b, double eps_min, double eps_max);

/// A section/control-step pair where the total projected demand exceeds the
/// total carriageway capacity: a structural bottleneck that no sharing can
/// resolve.
struct BottleneckFlag {
  int section = 0;  ///< 1-based
  int kc = 0;
};

/// Demand-supply margin series per section and control step.
struct MarginSeries {
  Eigen::MatrixXd d_a, d_b, d_total;  ///< n x Kc
  double q_cap = 0.0;
  bool has_plan = false;
  Eigen::MatrixXd cap_a, cap_b;  ///< eps*q_cap and (1-eps)*q_cap if a plan was given
  std::vector<BottleneckFlag> bottlenecks;
};

MarginSeries supply_demand_margins(const Scenario& s, const ProjectedDemands& p,
                                   const SharingPlan* plan = nullptr);

}  // namespace ibc

#endif  // IBC_PROJECTION_HPP_
