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

#include "ibc/projection.hpp"

#include <algorithm>

namespace ibc {

ProjectedDemands project_demands(const Scenario& s) {
  const int n = s.n();
  const int K = s.K();
  const int Kc = s.Kc();
  const int spc = s.control.steps_per_ctrl;
  const double T = s.control.t_step_h();
  const double v_f = s.fd.v_f;

  ProjectedDemands p;
  p.d_a.resize(n, K);
  p.d_b.resize(n, K);

  // Free-flow conservation from an empty road: q_i = v_f * rho_i, no
  // capacity or supply limits. d_i is the flow seeking to traverse section i
  // (upstream arrivals net of exits, plus the ramp inflow).
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < K; ++k) {
    double q_up = s.demands.entry_a[k];
    for (int i = 0; i < n; ++i) {
      double q_out = v_f * rho(i);
      double d = (1.0 - s.highway.exit_rate_a[i]) * q_up + s.demands.ramp_a[i][k];
      p.d_a(i, k) = d;
      rho(i) += T / s.highway.lengths[i] * (d - q_out);
      q_up = q_out;
    }
  }

  rho.setZero();
  for (int k = 0; k < K; ++k) {
    double q_up = s.demands.entry_b[k];
    for (int i = n - 1; i >= 0; --i) {
      double q_out = v_f * rho(i);
      double d = (1.0 - s.highway.exit_rate_b[i]) * q_up + s.demands.ramp_b[i][k];
      p.d_b(i, k) = d;
      rho(i) += T / s.highway.lengths[i] * (d - q_out);
      q_up = q_out;
    }
  }

  p.dc_a.resize(n, Kc);
  p.dc_b.resize(n, Kc);
  p.dcf_a.resize(n, Kc);
  p.dcf_b.resize(n, Kc);
  const double floor = s.control.d_floor;
  for (int kc = 0; kc < Kc; ++kc) {
    for (int i = 0; i < n; ++i) {
      double sa = 0.0, sb = 0.0;
      for (int k = kc * spc; k < (kc + 1) * spc; ++k) {
        sa += p.d_a(i, k);
        sb += p.d_b(i, k);
      }
      p.dc_a(i, kc) = sa / spc;
      p.dc_b(i, kc) = sb / spc;
      p.dcf_a(i, kc) = std::max(p.dc_a(i, kc), floor);
      p.dcf_b(i, kc) = std::max(p.dc_b(i, kc), floor);
    }
  }
  return p;
}

double reserve_balanced_eps(double d_a, double d_b, double eps_min, double eps_max) {
  double eps = d_a / (d_a + d_b);
  return std::clamp(eps, eps_min, eps_max);
}

MarginSeries supply_demand_margins(const Scenario& s, const ProjectedDemands& p,
                                   const SharingPlan* plan) {
  const int n = s.n();
  const int Kc = s.Kc();

  MarginSeries m;
  m.d_a = p.dc_a;
  m.d_b = p.dc_b;
  m.d_total = p.dc_a + p.dc_b;
  m.q_cap = s.fd.q_cap;
  if (plan != nullptr) {
    m.has_plan = true;
    m.cap_a = plan->eps * s.fd.q_cap;
    m.cap_b = (Eigen::MatrixXd::Ones(n, Kc) - plan->eps) * s.fd.q_cap;
  }
  for (int kc = 0; kc < Kc; ++kc) {
    for (int i = 0; i < n; ++i) {
      if (m.d_total(i, kc) > s.fd.q_cap) {
        m.bottlenecks.push_back({i + 1, kc});
      }
    }
  }
  return m;
}

}  // namespace ibc
