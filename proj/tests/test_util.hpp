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

#ifndef IBC_TESTS_TEST_UTIL_HPP_
#define IBC_TESTS_TEST_UTIL_HPP_

#include <doctest.h>

#include <random>
#include <vector>

#include "ibc/ctm.hpp"
#include "ibc/scenario.hpp"

namespace test_util {

using namespace ibc;

/// n sections, no ramps, no off-ramps, constant symmetric entry demand.
inline Scenario uniform_scenario(int n, int K, double demand, double t_step_s = 10.0,
                                 double t_ctrl_s = 60.0) {
  Scenario s;
  s.label = "uniform";
  s.fd = make_fd(100.0, 12.0, 12000.0);
  s.highway.n = n;
  s.highway.lengths.assign(n, 0.5);
  s.highway.exit_rate_a.assign(n, 0.0);
  s.highway.exit_rate_b.assign(n, 0.0);
  s.highway.has_onramp_a.assign(n, false);
  s.highway.has_onramp_b.assign(n, false);
  ControlConfig& c = s.control;
  c.t_step_s = t_step_s;
  c.t_ctrl_s = t_ctrl_s;
  c.steps_per_ctrl = static_cast<int>(t_ctrl_s / t_step_s);
  c.horizon = K;
  c.ctrl_horizon = K / c.steps_per_ctrl;
  c.eps_min.assign(n, 0.16);
  c.eps_max.assign(n, 0.84);
  c.eps_init.assign(n, 0.5);
  c.lambda_d = 0.0;
  c.lambda_r = 1.0;
  c.w1 = 1e-1;
  c.w2 = 1e-4;
  c.w3 = 1e-5;
  c.w4 = 1e-3;
  c.d_floor = 10.0;
  s.demands.entry_a.assign(K, demand);
  s.demands.entry_b.assign(K, demand);
  s.demands.ramp_a.assign(n, std::vector<double>(K, 0.0));
  s.demands.ramp_b.assign(n, std::vector<double>(K, 0.0));
  s.rho0_a.assign(n, 0.0);
  s.rho0_b.assign(n, 0.0);
  return s;
}

inline Scenario single_section_scenario(int K) { return uniform_scenario(1, K, 0.0); }

/// Randomized but always-valid scenario for property tests. Seeded by the
/// caller, so runs are reproducible.
inline Scenario random_scenario(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_dist(1, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n = n_dist(rng);
  const int spc = 1 + static_cast<int>(unit(rng) * 5.0);
  const int Kc = 2 + static_cast<int>(unit(rng) * 8.0);
  const int K = spc * Kc;

  Scenario s;
  s.label = "random";
  double v_f = 80.0 + 40.0 * unit(rng);
  double w_s = 10.0 + 10.0 * unit(rng);
  double q_cap = 8000.0 + 8000.0 * unit(rng);
  s.fd = make_fd(v_f, w_s, q_cap);

  s.highway.n = n;
  s.highway.lengths.clear();
  for (int i = 0; i < n; ++i) s.highway.lengths.push_back(0.4 + 0.4 * unit(rng));
  s.highway.exit_rate_a.assign(n, 0.0);
  s.highway.exit_rate_b.assign(n, 0.0);
  s.highway.has_onramp_a.assign(n, false);
  s.highway.has_onramp_b.assign(n, false);
  for (int i = 0; i < n; ++i) {
    if (unit(rng) < 0.3) s.highway.exit_rate_a[i] = 0.05 + 0.1 * unit(rng);
    if (unit(rng) < 0.3) s.highway.exit_rate_b[i] = 0.05 + 0.1 * unit(rng);
    if (unit(rng) < 0.3) s.highway.has_onramp_a[i] = true;
    if (unit(rng) < 0.3) s.highway.has_onramp_b[i] = true;
  }

  ControlConfig& c = s.control;
  c.t_step_s = 10.0;
  c.t_ctrl_s = 10.0 * spc;
  c.steps_per_ctrl = spc;
  c.horizon = K;
  c.ctrl_horizon = Kc;
  c.eps_min.assign(n, 0.16);
  c.eps_max.assign(n, 0.84);
  c.eps_init.assign(n, 0.3 + 0.4 * unit(rng));
  c.lambda_d = unit(rng) < 0.5 ? 0.0 : 0.4 * unit(rng) + 0.1;
  c.lambda_r = unit(rng) < 0.5 ? 1.0 : 0.5 + 0.5 * unit(rng);
  c.w1 = 1e-1;
  c.w2 = 1e-4;
  c.w3 = 1e-5;
  c.w4 = 1e-3;
  c.d_floor = 10.0;

  auto trapezoid = [&](double peak) {
    std::vector<DemandPoint> pts;
    double t_end = K * c.t_step_s;
    pts.push_back({0.0, peak * 0.2});
    pts.push_back({0.3 * t_end, peak});
    pts.push_back({0.7 * t_end, peak});
    pts.push_back({t_end, peak * 0.2});
    return expand_demand(pts, c.t_step_s, K);
  };
  s.demands.entry_a = trapezoid(0.6 * q_cap * unit(rng));
  s.demands.entry_b = trapezoid(0.6 * q_cap * unit(rng));
  s.demands.ramp_a.assign(n, std::vector<double>(K, 0.0));
  s.demands.ramp_b.assign(n, std::vector<double>(K, 0.0));
  for (int i = 0; i < n; ++i) {
    if (s.highway.has_onramp_a[i]) s.demands.ramp_a[i].assign(K, 2000.0 * unit(rng));
    if (s.highway.has_onramp_b[i]) s.demands.ramp_b[i].assign(K, 2000.0 * unit(rng));
  }

  s.rho0_a.assign(n, 0.0);
  s.rho0_b.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    s.rho0_a[i] = unit(rng) * 0.8 * c.eps_init[i] * s.fd.rho_cr;
    s.rho0_b[i] = unit(rng) * 0.8 * (1.0 - c.eps_init[i]) * s.fd.rho_cr;
  }
  validate(s);
  return s;
}

/// Random smooth plan within the sharing bounds.
inline SharingPlan random_plan(const Scenario& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd eps(s.n(), s.Kc());
  for (int i = 0; i < s.n(); ++i) {
    double v = s.control.eps_min[i] +
               (s.control.eps_max[i] - s.control.eps_min[i]) * unit(rng);
    for (int kc = 0; kc < s.Kc(); ++kc) {
      v += 0.1 * (unit(rng) - 0.5);
      v = std::clamp(v, s.control.eps_min[i], s.control.eps_max[i]);
      eps(i, kc) = v;
    }
  }
  return SharingPlan::from_decisions(s, eps);
}

/// Vehicle balance per direction over the full horizon:
/// initial + T*sum(entering) = final + T*sum(exiting).
inline void check_vehicle_balance(const Scenario& s, const TrafficTrajectory& traj,
                                  double rel_tol) {
  const int n = s.n();
  const int K = s.K();
  const double T = s.control.t_step_h();

  double initial_a = 0.0, final_a = 0.0, initial_b = 0.0, final_b = 0.0;
  for (int i = 0; i < n; ++i) {
    initial_a += s.highway.lengths[i] * traj.rho_a(i, 0);
    final_a += s.highway.lengths[i] * traj.rho_a(i, K);
    initial_b += s.highway.lengths[i] * traj.rho_b(i, 0);
    final_b += s.highway.lengths[i] * traj.rho_b(i, K);
  }

  double in_a = 0.0, out_a = 0.0, in_b = 0.0, out_b = 0.0;
  for (int k = 0; k < K; ++k) {
    in_a += traj.q_a(0, k);
    out_a += traj.q_a(n, k);
    in_b += traj.q_b(n, k);
    out_b += traj.q_b(0, k);
    for (int i = 0; i < n; ++i) {
      in_a += s.demands.ramp_a[i][k];
      in_b += s.demands.ramp_b[i][k];
      // Off-ramp flows: beta_i * upstream flow.
      out_a += s.highway.exit_rate_a[i] * traj.q_a(i, k);
      out_b += s.highway.exit_rate_b[i] * traj.q_b(i + 1, k);
    }
  }

  double lhs_a = initial_a + T * in_a;
  double rhs_a = final_a + T * out_a;
  double scale_a = std::max({lhs_a, rhs_a, 1.0});
  CHECK(std::abs(lhs_a - rhs_a) <= rel_tol * scale_a);

  double lhs_b = initial_b + T * in_b;
  double rhs_b = final_b + T * out_b;
  double scale_b = std::max({lhs_b, rhs_b, 1.0});
  CHECK(std::abs(lhs_b - rhs_b) <= rel_tol * scale_b);
}

}  // namespace test_util

#endif  // IBC_TESTS_TEST_UTIL_HPP_
