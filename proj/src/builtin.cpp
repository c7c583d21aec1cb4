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

#include <stdexcept>

#include "ibc/scenario.hpp"

namespace ibc {

namespace {

// Shared stretch: 3 km in six 0.5 km sections. Direction a has an off-ramp
// in section 2 and an on-ramp in section 5; direction b an off-ramp in
// section 4 and an on-ramp in section 3. Exit rates 0.1.
Scenario base_scenario() {
  Scenario s;
  s.fd = make_fd(100.0, 12.0, 12000.0);

  s.highway.n = 6;
  s.highway.lengths.assign(6, 0.5);
  s.highway.exit_rate_a = {0.0, 0.1, 0.0, 0.0, 0.0, 0.0};
  s.highway.exit_rate_b = {0.0, 0.0, 0.0, 0.1, 0.0, 0.0};
  s.highway.has_onramp_a = {false, false, false, false, true, false};
  s.highway.has_onramp_b = {false, false, true, false, false, false};

  ControlConfig& c = s.control;
  c.t_step_s = 10.0;
  c.t_ctrl_s = 60.0;
  c.horizon = 360;
  c.steps_per_ctrl = 6;
  c.ctrl_horizon = 60;
  c.eps_min.assign(6, 0.16);
  c.eps_max.assign(6, 0.84);
  c.eps_init.assign(6, 0.5);
  c.lambda_d = 0.4;
  c.lambda_r = 0.7;
  c.w1 = 1e-1;
  c.w2 = 1e-4;
  c.w3 = 1e-5;
  c.w4 = 1e-3;
  c.d_floor = 10.0;

  s.rho0_a = {5.0, 5.0, 5.0, 5.0, 18.5, 29.4};
  s.rho0_b = {14.4, 14.4, 14.0, 5.0, 5.0, 5.0};
  return s;
}

// Demand reconstructions. The demand plots of the reference cases are
// published only as figures, so these trapezoids are calibrated to match the
// reported congestion onset/dissolution times and improvement ranges, not
// exact flow readings.
const std::vector<DemandPoint> kUncongestedEntryA = {
    {0.0, 500.0}, {250.0, 500.0}, {700.0, 6000.0}, {1300.0, 6000.0}, {1900.0, 500.0}};
const std::vector<DemandPoint> kUncongestedEntryB = {
    {0.0, 500.0}, {1600.0, 500.0}, {2200.0, 5950.0}, {2800.0, 5950.0}, {3250.0, 500.0}};

const std::vector<DemandPoint> kCongestedEntryA = {
    {0.0, 500.0}, {850.0, 500.0}, {1300.0, 6000.0}, {1900.0, 6000.0}, {2500.0, 500.0}};
const std::vector<DemandPoint> kCongestedEntryB = {
    {0.0, 500.0}, {1310.0, 500.0}, {1910.0, 5850.0}, {2510.0, 5850.0}, {2960.0, 500.0}};

const double kRampA = 1500.0;  // on-ramp demand, direction a (section 5)
const double kRampB = 800.0;   // on-ramp demand, direction b (section 3)

void fill_demands(Scenario& s, const std::vector<DemandPoint>& entry_a,
                  const std::vector<DemandPoint>& entry_b) {
  const int K = s.control.horizon;
  const double T_s = s.control.t_step_s;
  s.demands.entry_a = expand_demand(entry_a, T_s, K);
  s.demands.entry_b = expand_demand(entry_b, T_s, K);
  s.demands.ramp_a.assign(6, std::vector<double>(K, 0.0));
  s.demands.ramp_b.assign(6, std::vector<double>(K, 0.0));
  s.demands.ramp_a[4].assign(K, kRampA);
  s.demands.ramp_b[2].assign(K, kRampB);
}

}  // namespace

std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> out;

  Scenario unc = base_scenario();
  unc.label = "uncongested";
  fill_demands(unc, kUncongestedEntryA, kUncongestedEntryB);
  validate(unc);
  out.push_back(std::move(unc));

  Scenario con = base_scenario();
  con.label = "congested";
  fill_demands(con, kCongestedEntryA, kCongestedEntryB);
  validate(con);
  out.push_back(std::move(con));

  return out;
}

Scenario builtin_scenario(const std::string& name) {
  for (Scenario& s : builtin_scenarios()) {
    if (s.label == name) return std::move(s);
  }
  throw std::invalid_argument("unknown builtin scenario: " + name);
}

}  // namespace ibc
