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

#include <random>
#include <sstream>

#include "ibc/qp.hpp"
#include "test_util.hpp"

using namespace ibc;

namespace {

Scenario tiny_scenario(int n, int Kc, double demand_a, double demand_b) {
  Scenario s = test_util::uniform_scenario(n, 6 * Kc, 0.0);
  s.demands.entry_a.assign(s.K(), demand_a);
  s.demands.entry_b.assign(s.K(), demand_b);
  validate(s);
  return s;
}

}  // namespace

TEST_CASE("variable counts by family") {
  {
    Scenario s = tiny_scenario(1, 1, 100.0, 100.0);
    s.control.horizon = 1;
    s.control.steps_per_ctrl = 1;
    s.control.t_ctrl_s = 10.0;
    s.control.ctrl_horizon = 1;
    s.demands.entry_a.assign(1, 100.0);
    s.demands.entry_b.assign(1, 100.0);
    s.demands.ramp_a.assign(1, std::vector<double>(1, 0.0));
    s.demands.ramp_b.assign(1, std::vector<double>(1, 0.0));
    validate(s);
    VarIndexMap m = build_index_map(s);
    CHECK(m.total_vars == 7);  // 2 densities + 2 flows + 3 sharing variables
  }
  {
    Scenario s = builtin_scenario("uncongested");
    VarIndexMap m = build_index_map(s);
    CHECK(m.total_vars == 9720);
    RowIndexMap r = build_row_map(s);
    CHECK(r.n_eq == 2 * 6 * 360);
    // Two flow caps per (i,k) and direction, two supply rows per interior
    // pair, four sharing links per (i,kc), two jam rows per (i,k).
    CHECK(r.n_ineq == 2 * (6 * 360) * 2 + 2 * (5 * 360) * 2 + 4 * (6 * 60) + 2 * (6 * 360));
  }
}

TEST_CASE("index map is a bijection") {
  Scenario s = tiny_scenario(3, 2, 500.0, 500.0);
  VarIndexMap m = build_index_map(s);
  for (int idx = 0; idx < m.total_vars; ++idx) {
    VarIndexMap::Entry e = m.decode(idx);
    CHECK(m.encode(e) == idx);
  }
  CHECK_THROWS(m.decode(m.total_vars));
  CHECK_THROWS(m.decode(-1));
}

TEST_CASE("constraint counts for the one-section one-step instance") {
  Scenario s = tiny_scenario(1, 1, 100.0, 100.0);
  s.control.horizon = 1;
  s.control.steps_per_ctrl = 1;
  s.control.t_ctrl_s = 10.0;
  s.control.ctrl_horizon = 1;
  s.demands.entry_a.assign(1, 100.0);
  s.demands.entry_b.assign(1, 100.0);
  s.demands.ramp_a.assign(1, std::vector<double>(1, 0.0));
  s.demands.ramp_b.assign(1, std::vector<double>(1, 0.0));
  validate(s);
  QpProblem qp = build_qp(s, project_demands(s));
  CHECK(qp.row_map.n_eq == 2);
  // Per direction: speed and capacity caps (supply rows vanish for n = 1),
  // two applied-sharing links, one jam row.
  CHECK(qp.row_map.n_ineq == 10);
}

TEST_CASE("objective: TTS-only configuration") {
  Scenario s = tiny_scenario(2, 2, 500.0, 500.0);
  s.control.w1 = 0.0;
  s.control.w2 = 0.0;
  s.control.w3 = 0.0;
  s.control.w4 = 0.0;
  QpProblem qp = build_qp(s, project_demands(s));
  CHECK(qp.H.nonZeros() == 0);
  CHECK(qp.objective_constant == 0.0);
  const double tl = s.control.t_step_h() * 0.5;
  for (int k = 1; k <= s.K(); ++k) {
    for (int i = 1; i <= 2; ++i) {
      CHECK(qp.c(qp.index_map.rho_a(i, k)) == doctest::Approx(tl).epsilon(1e-12));
      CHECK(qp.c(qp.index_map.rho_b(i, k)) == doctest::Approx(tl).epsilon(1e-12));
    }
  }
  for (int kc = 0; kc < s.Kc(); ++kc)
    for (int i = 1; i <= 2; ++i) {
      CHECK(qp.c(qp.index_map.eps(i, kc)) == 0.0);
      CHECK(qp.c(qp.index_map.eps_a(i, kc)) == 0.0);
    }
}

TEST_CASE("time-smoothness block is the expected tridiagonal form") {
  Scenario s = tiny_scenario(1, 3, 500.0, 500.0);
  s.control.w1 = 0.0;
  s.control.w3 = 0.0;
  s.control.w4 = 0.0;
  s.control.w2 = 1e-4;
  QpProblem qp = build_qp(s, project_demands(s));
  const VarIndexMap& m = qp.index_map;
  Eigen::MatrixXd h = Eigen::MatrixXd(qp.H);
  double w2 = s.control.w2;
  CHECK(h(m.eps(1, 0), m.eps(1, 0)) == doctest::Approx(2.0 * w2));
  CHECK(h(m.eps(1, 1), m.eps(1, 1)) == doctest::Approx(4.0 * w2));
  CHECK(h(m.eps(1, 2), m.eps(1, 2)) == doctest::Approx(2.0 * w2));
  CHECK(h(m.eps(1, 0), m.eps(1, 1)) == doctest::Approx(-2.0 * w2));
  CHECK(h(m.eps(1, 1), m.eps(1, 0)) == doctest::Approx(-2.0 * w2));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  CHECK(es.eigenvalues().minCoeff() >= -1e-15);
}

TEST_CASE("capacity-reserve term alone is minimized at one half") {
  // With symmetric demands, the single-eps quadratic has its unconstrained
  // minimum at 0.5: H*eps + c = 0 at eps = 0.5.
  Scenario s = tiny_scenario(1, 1, 1000.0, 1000.0);
  s.control.w1 = 0.0;
  s.control.w2 = 0.0;
  s.control.w3 = 0.0;
  s.control.w4 = 1e-3;
  ProjectedDemands p = project_demands(s);
  QpProblem qp = build_qp(s, p);
  const VarIndexMap& m = qp.index_map;
  int e = m.eps(1, 0);
  double hdiag = qp.H.coeff(e, e);
  double lin = qp.c(e);
  REQUIRE(hdiag > 0.0);
  CHECK(-lin / hdiag == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("capacity cap reduces to the pure share bound without droop") {
  Scenario s = tiny_scenario(1, 1, 500.0, 500.0);
  s.control.lambda_d = 0.0;
  QpProblem qp = build_qp(s, project_demands(s));
  const RowIndexMap& r = qp.row_map;
  const VarIndexMap& m = qp.index_map;
  int row = r.cap_a(1, 0);
  // q - eps_a * q_cap <= 0, with no density term.
  CHECK(qp.A_i.coeff(row, m.q_a(1, 0)) == doctest::Approx(1.0));
  CHECK(qp.A_i.coeff(row, m.eps_a(1, 0)) == doctest::Approx(-12000.0));
  CHECK(qp.b_i(row) == doctest::Approx(0.0));
}

TEST_CASE("applied-sharing links at the first control step use eps_init") {
  Scenario s = tiny_scenario(1, 2, 500.0, 500.0);
  s.control.eps_init.assign(1, 0.5);
  QpProblem qp = build_qp(s, project_demands(s));
  const RowIndexMap& r = qp.row_map;
  const VarIndexMap& m = qp.index_map;
  // eps_a(0) <= eps(0)
  CHECK(qp.A_i.coeff(r.link_now_a(1, 0), m.eps_a(1, 0)) == 1.0);
  CHECK(qp.A_i.coeff(r.link_now_a(1, 0), m.eps(1, 0)) == -1.0);
  CHECK(qp.b_i(r.link_now_a(1, 0)) == 0.0);
  // eps_a(0) <= eps_init
  CHECK(qp.A_i.coeff(r.link_prev_a(1, 0), m.eps_a(1, 0)) == 1.0);
  CHECK(qp.b_i(r.link_prev_a(1, 0)) == doctest::Approx(0.5));
  // eps_b(0) <= 1 - eps_init
  CHECK(qp.b_i(r.link_prev_b(1, 0)) == doctest::Approx(0.5));
  // Later steps reference the previous decision variable instead.
  CHECK(qp.A_i.coeff(r.link_prev_a(1, 1), m.eps(1, 0)) == -1.0);
  CHECK(qp.b_i(r.link_prev_a(1, 1)) == 0.0);
}

TEST_CASE("quadratic form is PSD under random probing") {
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const char* name : {"uncongested", "congested"}) {
    Scenario s = builtin_scenario(name);
    QpProblem qp = build_qp(s, project_demands(s));
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd z(qp.index_map.total_vars);
      for (int j = 0; j < z.size(); ++j) z(j) = normal(rng);
      double quad = z.dot(qp.H * z);
      CHECK(quad >= -1e-9 * z.squaredNorm());
    }
  }
}

TEST_CASE("no-control plan plus its CTM trajectory is QP-feasible") {
  std::mt19937_64 rng(88);
  int tested = 0;
  for (int trial = 0; trial < 12 && tested < 6; ++trial) {
    Scenario s = test_util::random_scenario(rng);
    SharingPlan plan = SharingPlan::constant(s, 0.5);
    TrafficTrajectory traj = simulate(s, plan);
    if (!traj.warnings.empty()) continue;  // sharing may strand density
    ++tested;
    QpProblem qp = build_qp(s, project_demands(s));
    Eigen::VectorXd x = pack_point(plan, traj, qp.index_map);
    CHECK((qp.A_e * x - qp.b_e).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK((qp.A_i * x - qp.b_i).maxCoeff() <= 1e-7);
    CHECK((qp.lb - x).maxCoeff() <= 1e-7);
    CHECK((x - qp.ub).maxCoeff() <= 1e-7);
  }
  CHECK(tested >= 3);
}

TEST_CASE("assembled objective matches the direct cost evaluation") {
  // The quadratic form evaluated at a packed feasible point must equal the
  // cost function computed straight from the plan and trajectory.
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 6; ++trial) {
    Scenario s = test_util::random_scenario(rng);
    ProjectedDemands p = project_demands(s);
    SharingPlan plan = test_util::random_plan(s, rng);
    TrafficTrajectory traj = simulate(s, plan);
    QpProblem qp = build_qp(s, p);
    Eigen::VectorXd x = pack_point(plan, traj, qp.index_map);
    double via_qp = qp.objective_value(x) + qp.objective_constant;
    double direct = evaluate_objective(s, p, plan, traj);
    CHECK(via_qp == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("extract round-trips a packed point") {
  Scenario s = tiny_scenario(2, 2, 3000.0, 2000.0);
  ProjectedDemands p = project_demands(s);
  SharingPlan plan = SharingPlan::constant(s, 0.5);
  TrafficTrajectory traj = simulate(s, plan);
  QpProblem qp = build_qp(s, p);
  Eigen::VectorXd x = pack_point(plan, traj, qp.index_map);
  ExtractedSolution ext = extract_solution(x, qp.index_map, s);
  CHECK((ext.plan.eps - plan.eps).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((ext.qp_traj.rho_a - traj.rho_a).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(ext.qp_tts == doctest::Approx(traj.tts).epsilon(1e-9));
  CHECK_THROWS(extract_solution(Eigen::VectorXd::Zero(3), qp.index_map, s));
}

TEST_CASE("entry flows are constants, not decision variables") {
  Scenario s = tiny_scenario(1, 1, 4321.0, 1234.0);
  QpProblem qp = build_qp(s, project_demands(s));
  // The conservation right-hand side carries the entry contribution.
  const double coef = s.control.t_step_h() / 0.5;
  CHECK(qp.b_e(qp.row_map.cons_a(1, 0)) ==
        doctest::Approx(s.rho0_a[0] + coef * 4321.0).epsilon(1e-12));
  CHECK(qp.b_e(qp.row_map.cons_b(1, 0)) ==
        doctest::Approx(s.rho0_b[0] + coef * 1234.0).epsilon(1e-12));
}

TEST_CASE("every variable is constrained or bounded") {
  Scenario s = tiny_scenario(2, 2, 800.0, 700.0);
  QpProblem qp = build_qp(s, project_demands(s));
  for (int j = 0; j < qp.index_map.total_vars; ++j) {
    bool bounded = std::isfinite(qp.lb(j)) || std::isfinite(qp.ub(j));
    CHECK(bounded);
  }
}

TEST_CASE("problem dump emits the documented sections") {
  Scenario s = tiny_scenario(1, 1, 500.0, 500.0);
  QpProblem qp = build_qp(s, project_demands(s));
  std::ostringstream os;
  dump_problem(qp, os);
  std::string text = os.str();
  CHECK(text.rfind("ibc-qp 1", 0) == 0);
  for (const char* key : {"vars ", "objective_constant ", "H ", "\nc ", "\nAe ",
                          "\nbe ", "\nAi ", "\nbi ", "\nlb ", "\nub "}) {
    CHECK(text.find(key) != std::string::npos);
  }
}
