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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "ibc/analysis.hpp"
#include "ibc/io.hpp"
#include "test_util.hpp"

using namespace ibc;

namespace {

/// Builtin-like stretch with a shortened horizon, for fast end-to-end runs.
Scenario short_bidirectional_scenario() {
  Scenario s = test_util::uniform_scenario(3, 60, 0.0);
  s.highway.has_onramp_a[2] = true;
  s.demands.ramp_a[2].assign(s.K(), 1200.0);
  const double t_end = s.K() * s.control.t_step_s;
  std::vector<DemandPoint> pa = {{0.0, 1500.0}, {0.3 * t_end, 5600.0},
                                 {0.6 * t_end, 5600.0}, {0.9 * t_end, 1500.0}};
  std::vector<DemandPoint> pb = {{0.0, 1000.0}, {0.5 * t_end, 4600.0},
                                 {t_end, 4600.0}};
  s.demands.entry_a = expand_demand(pa, s.control.t_step_s, s.K());
  s.demands.entry_b = expand_demand(pb, s.control.t_step_s, s.K());
  s.control.lambda_d = 0.4;
  s.control.lambda_r = 0.7;
  s.rho0_a.assign(3, 10.0);
  s.rho0_b.assign(3, 8.0);
  validate(s);
  return s;
}

}  // namespace

TEST_CASE("capacity-drop variant switching") {
  Scenario s = builtin_scenario("uncongested");
  Scenario on = with_capacity_drop(s, true);
  CHECK(on.control.lambda_d == doctest::Approx(0.4));
  CHECK(on.control.lambda_r == doctest::Approx(0.7));
  Scenario off = with_capacity_drop(s, false);
  CHECK(off.control.lambda_d == 0.0);
  CHECK(off.control.lambda_r == 1.0);
}

TEST_CASE("improvement percentages are computed, not stored") {
  Scenario s = short_bidirectional_scenario();
  VariantResult vr = run_variant(s, true);
  const CompareRow& r = vr.row;
  CHECK(r.improvement_qp_pct ==
        doctest::Approx(100.0 * (r.no_control_tts - r.qp_tts) / r.no_control_tts));
  CHECK(r.improvement_sim_pct ==
        doctest::Approx(100.0 * (r.no_control_tts - r.sim_tts) / r.no_control_tts));
  // Relaxation ordering both ways, up to solver tolerance.
  CHECK(r.qp_tts <= r.sim_tts + 1e-6 * r.qp_tts);
  CHECK(r.improvement_qp_pct >= r.improvement_sim_pct - 1e-6 * r.improvement_qp_pct - 1e-6);
  // Controlled never worse than no control.
  CHECK(r.sim_tts <= r.no_control_tts + 1e-6 * r.no_control_tts);
}

TEST_CASE("zero-demand scenario leaves nothing to optimize") {
  Scenario s = test_util::uniform_scenario(2, 24, 0.0);
  s.rho0_a.assign(2, 12.0);
  s.rho0_b.assign(2, 9.0);
  validate(s);
  VariantResult vr = run_variant(s, false);
  // TTS is the decay of the initial densities; sharing cannot speed it up.
  CHECK(vr.row.no_control_tts > 0.0);
  CHECK(vr.row.improvement_sim_pct >= -1e-6);
  CHECK(vr.row.improvement_sim_pct <= 1.0);
}

TEST_CASE("no-control capacity drop ordering on both builtin scenarios") {
  for (const char* name : {"uncongested", "congested"}) {
    Scenario s = builtin_scenario(name);
    TrafficTrajectory with = simulate(with_capacity_drop(s, true), SharingPlan::constant(s, 0.5));
    TrafficTrajectory without =
        simulate(with_capacity_drop(s, false), SharingPlan::constant(s, 0.5));
    CHECK(with.tts >= without.tts + 1.0);
  }
}

TEST_CASE("density field masks congested cells exactly") {
  Scenario s = short_bidirectional_scenario();
  TrafficTrajectory traj = simulate(s, SharingPlan::constant(s, 0.5));
  DensityField field = density_field(traj, s);
  int count_a = 0;
  for (int k = 0; k < s.K(); ++k)
    for (int i = 0; i < s.n(); ++i) {
      CHECK(field.mask_a(i, k) == (traj.rel_a(i, k) > 1.0 ? 1 : 0));
      count_a += field.mask_a(i, k);
    }
  CHECK(field.congested_cells_a == count_a);
  bool empty = field.congested_cells_a == 0 && field.congested_cells_b == 0;
  CHECK(empty == (traj.rel_a.maxCoeff() <= 1.0 && traj.rel_b.maxCoeff() <= 1.0));
}

TEST_CASE("congestion windows locate onset and dissolution") {
  Scenario s = builtin_scenario("uncongested");
  TrafficTrajectory traj = simulate(s, SharingPlan::constant(s, 0.5));
  DensityField field = density_field(traj, s);
  CongestionWindow wa = congestion_window(field, 'a', 5);
  CHECK(wa.onset >= 30);
  CHECK(wa.onset <= 90);
  CHECK(wa.dissolution >= 170);
  CHECK(wa.dissolution <= 230);
  CongestionWindow none = congestion_window(field, 'a', 6);
  CHECK(none.onset == -1);
}

TEST_CASE("relative density equals one exactly at the scaled critical density") {
  Scenario s = test_util::uniform_scenario(1, 6, 0.0);
  SharingPlan plan = SharingPlan::constant(s, 0.5);
  TrafficTrajectory traj;
  traj.rel_a.resize(1, 1);
  double rho = 0.5 * s.fd.rho_cr;
  traj.rel_a(0, 0) = rho / (plan.eps_a(0, 0) * s.fd.rho_cr);
  CHECK(traj.rel_a(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("sharing surface diagnostics track the smoothness penalties") {
  Scenario s = short_bidirectional_scenario();
  VariantResult base = run_variant(s, true);
  EpsSurface surf = eps_surface(base.extracted.plan);
  CHECK(surf.max_delta_time > 0.0);

  // No-control surface is flat.
  EpsSurface flat = eps_surface(SharingPlan::constant(s, 0.5));
  CHECK(flat.max_delta_time == 0.0);
  CHECK(flat.max_delta_space == 0.0);

  // Raising both smoothness weights by the same factor must shrink the
  // weighted roughness they penalize (the pointwise maxima may move around).
  auto roughness = [&s](const SharingPlan& plan) {
    double r = 0.0;
    for (int kc = 1; kc < plan.eps.cols(); ++kc)
      for (int i = 0; i < plan.eps.rows(); ++i) {
        double d = plan.eps(i, kc) - plan.eps(i, kc - 1);
        r += s.control.w2 * d * d;
      }
    for (int kc = 0; kc < plan.eps.cols(); ++kc)
      for (int i = 1; i < plan.eps.rows(); ++i) {
        double d = plan.eps(i, kc) - plan.eps(i - 1, kc);
        r += s.control.w3 * d * d;
      }
    return r;
  };
  Scenario stiffer = s;
  stiffer.control.w2 *= 10.0;
  stiffer.control.w3 *= 10.0;
  VariantResult stiff = run_variant(stiffer, true);
  CHECK(roughness(stiff.extracted.plan) <= roughness(base.extracted.plan) + 1e-9);
  EpsSurface surf2 = eps_surface(stiff.extracted.plan);
  CHECK(surf2.max_delta_time <= 2.0 * surf.max_delta_time + 1e-6);
}

TEST_CASE("congested optimum holds traffic back around the bottleneck approach") {
  VariantResult vr = run_variant(builtin_scenario("congested"), true);
  REQUIRE(!vr.holding_back.flags.empty());
  // Flags cluster on the upstream approach of the bottleneck (sections 3-5).
  int in_approach = 0;
  for (const auto& f : vr.holding_back.flags) {
    if (f.direction == 'a' && f.section >= 3 && f.section <= 5) ++in_approach;
  }
  CHECK(in_approach > 0);
  CHECK(in_approach >= static_cast<int>(vr.holding_back.flags.size()) / 2);
  // The held-back slack is what separates the two TTS readings.
  CHECK(vr.row.sim_tts >= vr.row.qp_tts - 1e-6 * vr.row.qp_tts);
}

TEST_CASE("report CSV has the stable column order") {
  AnalysisReport report;
  CompareRow row;
  row.scenario_label = "demo";
  row.capacity_drop = true;
  row.no_control_tts = 100.0;
  row.qp_tts = 80.0;
  row.sim_tts = 81.0;
  row.improvement_qp_pct = 20.0;
  row.improvement_sim_pct = 19.0;
  report.rows.push_back(row);
  std::ostringstream os;
  write_report_csv(report, os);
  std::istringstream is(os.str());
  std::string header, line;
  std::getline(is, header);
  CHECK(header ==
        "scenario,capacity_drop,no_control_tts,qp_tts,sim_tts,improvement_qp_pct,"
        "improvement_sim_pct,holding_back_count,holding_back_max_slack,bottleneck_count,"
        "solver_iterations");
  std::getline(is, line);
  CHECK(line.rfind("demo,on,100,80,81,20,19,", 0) == 0);
}

TEST_CASE("trajectory and plan round-trip through their CSV forms") {
  Scenario s = short_bidirectional_scenario();
  VariantResult vr = run_variant(s, true);

  std::ostringstream plan_os;
  write_plan_csv(vr.extracted.plan, plan_os);
  std::istringstream plan_is(plan_os.str());
  Eigen::MatrixXd eps = read_plan_csv(plan_is, s);
  CHECK((eps - vr.extracted.plan.eps).cwiseAbs().maxCoeff() == 0.0);

  std::ostringstream traj_os;
  write_trajectory_csv(vr.controlled_traj, vr.extracted.plan, s, traj_os);
  std::string first_line;
  std::istringstream traj_is(traj_os.str());
  std::getline(traj_is, first_line);
  CHECK(first_line == "k,section,direction,rho,rel_rho,q,eps_applied");
}
