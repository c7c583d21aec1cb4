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

#ifndef IBC_SCENARIO_HPP_
#define IBC_SCENARIO_HPP_

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ibc {

/// Error raised when a scenario config cannot be parsed.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Error raised when a scenario violates an invariant. `field` names the
/// offending config entry (e.g. "control.T_c").
struct ValidationError : std::runtime_error {
  std::string field;
  ValidationError(std::string field_, const std::string& msg)
      : std::runtime_error(field_ + ": " + msg), field(std::move(field_)) {}
};

/// Triangular fundamental diagram of the full carriageway (both directions).
/// rho_cr and rho_max are derived from the closure
/// q_cap = v_f * rho_cr = w_s * (rho_max - rho_cr).
struct FdParams {
  double v_f = 0.0;      ///< free speed (km/h)
  double w_s = 0.0;      ///< back-wave speed (km/h)
  double q_cap = 0.0;    ///< total bidirectional capacity (veh/h)
  double rho_cr = 0.0;   ///< total critical density (veh/km), derived
  double rho_max = 0.0;  ///< total jam density (veh/km), derived
};

/// Builds FdParams from the three free parameters, deriving rho_cr/rho_max.
FdParams make_fd(double v_f, double w_s, double q_cap);

/// Stretch geometry. Direction a runs from section 1 to n, direction b from
/// section n to 1. Sections are stored zero-based internally; public file
/// formats use 1-based section numbers.
struct Highway {
  int n = 0;                         ///< section count
  std::vector<double> lengths;       ///< L_i (km)
  std::vector<double> exit_rate_a;   ///< beta_i^a, off-ramp exit rates
  std::vector<double> exit_rate_b;   ///< beta_i^b
  std::vector<bool> has_onramp_a;    ///< on-ramp present, direction a
  std::vector<bool> has_onramp_b;    ///< on-ramp present, direction b
  std::optional<double> width_m;     ///< total physical width (metadata only)
};

/// Piecewise-linear demand breakpoint: flow value q (veh/h) at time t_s (s).
struct DemandPoint {
  double t_s = 0.0;
  double q = 0.0;
};

/// External demand trajectories, expanded to one value per model step.
struct DemandSet {
  std::vector<double> entry_a;              ///< q_0^a(k), length K
  std::vector<double> entry_b;              ///< q_{n+1}^b(k), length K
  std::vector<std::vector<double>> ramp_a;  ///< r_i^a(k), n x K (zero rows where no ramp)
  std::vector<std::vector<double>> ramp_b;  ///< r_i^b(k), n x K
};

/// Expands a breakpoint list to per-step values by linear interpolation,
/// sampling at t = k * t_step_s. Constant extrapolation outside the list.
std::vector<double> expand_demand(const std::vector<DemandPoint>& points,
                                  double t_step_s, int horizon);

/// Time discretization, sharing-factor bounds and objective weights.
struct ControlConfig {
  double t_step_s = 0.0;        ///< model step T (seconds in config; hours internally via t_step_h())
  double t_ctrl_s = 0.0;        ///< control step T_c (seconds)
  int horizon = 0;              ///< K, model steps
  int ctrl_horizon = 0;         ///< K_c = K*T/T_c, derived
  int steps_per_ctrl = 0;       ///< T_c / T, derived
  std::vector<double> eps_min;  ///< per-section lower sharing bound
  std::vector<double> eps_max;  ///< per-section upper sharing bound
  std::vector<double> eps_init; ///< eps(-1), boundary in force before the horizon
  double lambda_d = 0.0;        ///< capacity-drop demand droop
  double lambda_r = 1.0;        ///< capacity-drop ramp attenuation
  double w1 = 0.0, w2 = 0.0, w3 = 0.0, w4 = 0.0;  ///< objective weights
  double d_floor = 10.0;        ///< minimum projected demand in the w4 term (veh/h)

  double t_step_h() const { return t_step_s / 3600.0; }
  double t_ctrl_h() const { return t_ctrl_s / 3600.0; }
};

/// A complete problem instance. Immutable after construction; safe to share
/// across threads.
struct Scenario {
  Highway highway;
  FdParams fd;
  DemandSet demands;
  ControlConfig control;
  std::vector<double> rho0_a;  ///< initial densities, direction a (veh/km)
  std::vector<double> rho0_b;  ///< initial densities, direction b (veh/km)
  std::string label;

  int n() const { return highway.n; }
  int K() const { return control.horizon; }
  int Kc() const { return control.ctrl_horizon; }
};

/// Throws ValidationError on the first violated invariant.
void validate(const Scenario& s);

/// Parses a scenario from JSON config text. Runs validate().
Scenario parse_scenario(const std::string& json_text);

/// Loads a scenario from a config file path, or a builtin by name.
Scenario load_scenario(const std::string& path_or_name);

/// Serializes a scenario back to config text such that
/// parse_scenario(emit_scenario(s)) reproduces s field-by-field.
std::string emit_scenario(const Scenario& s);

/// Bundled reconstructions of the two reference cases
/// ("uncongested", "congested").
std::vector<Scenario> builtin_scenarios();

/// Returns the builtin scenario with the given label; throws if unknown.
Scenario builtin_scenario(const std::string& name);

}  // namespace ibc

#endif  // IBC_SCENARIO_HPP_
