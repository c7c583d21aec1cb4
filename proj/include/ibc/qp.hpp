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

#ifndef IBC_QP_HPP_
#define IBC_QP_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <string>

#include "ibc/ctm.hpp"
#include "ibc/projection.hpp"
#include "ibc/scenario.hpp"

namespace ibc {

/// Decision-variable families of the optimal control problem. Densities and
/// flows are per model step; sharing factors per control step. Entry flows
/// are known constants, not decision variables.
enum class VarFamily { RhoA, RhoB, QA, QB, Eps, EpsA, EpsB };

/// Deterministic layout of the decision vector: family-major, then step,
/// then section. Every (family, i, k) maps to a unique index.
struct VarIndexMap {
  int n = 0, K = 0, Kc = 0;
  int total_vars = 0;

  // Family base offsets.
  int off_rho_a = 0, off_rho_b = 0, off_q_a = 0, off_q_b = 0;
  int off_eps = 0, off_eps_a = 0, off_eps_b = 0;

  /// i in 1..n, k in 1..K
  int rho_a(int i, int k) const { return off_rho_a + (k - 1) * n + (i - 1); }
  int rho_b(int i, int k) const { return off_rho_b + (k - 1) * n + (i - 1); }
  /// i in 1..n, k in 0..K-1 (q_a(i) = exit flow of section i, direction a)
  int q_a(int i, int k) const { return off_q_a + k * n + (i - 1); }
  /// i in 1..n, k in 0..K-1 (q_b(i) = exit flow of section i, direction b)
  int q_b(int i, int k) const { return off_q_b + k * n + (i - 1); }
  /// i in 1..n, kc in 0..Kc-1
  int eps(int i, int kc) const { return off_eps + kc * n + (i - 1); }
  int eps_a(int i, int kc) const { return off_eps_a + kc * n + (i - 1); }
  int eps_b(int i, int kc) const { return off_eps_b + kc * n + (i - 1); }

  struct Entry {
    VarFamily family;
    int i;  ///< 1-based section
    int k;  ///< model step or control step, per family
  };
  Entry decode(int idx) const;
  int encode(const Entry& e) const;
};

VarIndexMap build_index_map(const Scenario& s);

/// Constraint-row families, mirroring the inequality groups of the model:
/// flow demand/supply caps, applied-sharing links, and jam-density rows.
enum class RowFamily {
  ConsA, ConsB,          // equalities: conservation per (i, k)
  FlowVfA, FlowCapA,     // q <= v_f rho ; q <= eps^a q_cap (+ droop)
  FlowSupA, FlowSupCapA, // supply and supply-capacity rows, i = 1..n-1
  FlowVfB, FlowCapB,
  FlowSupB, FlowSupCapB, // i = 2..n
  EpsLinkNowA, EpsLinkPrevA,
  EpsLinkNowB, EpsLinkPrevB,
  JamA, JamB
};

/// Deterministic layout of constraint rows (family-major, then step, then
/// section), split into the equality and inequality systems.
struct RowIndexMap {
  int n = 0, K = 0, Kc = 0;
  int n_eq = 0, n_ineq = 0;

  int off_cons_a = 0, off_cons_b = 0;
  int off_vf_a = 0, off_cap_a = 0, off_sup_a = 0, off_supcap_a = 0;
  int off_vf_b = 0, off_cap_b = 0, off_sup_b = 0, off_supcap_b = 0;
  int off_link_now_a = 0, off_link_prev_a = 0;
  int off_link_now_b = 0, off_link_prev_b = 0;
  int off_jam_a = 0, off_jam_b = 0;

  int cons_a(int i, int k) const { return off_cons_a + k * n + (i - 1); }
  int cons_b(int i, int k) const { return off_cons_b + k * n + (i - 1); }
  int vf_a(int i, int k) const { return off_vf_a + k * n + (i - 1); }
  int cap_a(int i, int k) const { return off_cap_a + k * n + (i - 1); }
  int sup_a(int i, int k) const { return off_sup_a + k * (n - 1) + (i - 1); }
  int supcap_a(int i, int k) const { return off_supcap_a + k * (n - 1) + (i - 1); }
  int vf_b(int i, int k) const { return off_vf_b + k * n + (i - 1); }
  int cap_b(int i, int k) const { return off_cap_b + k * n + (i - 1); }
  int sup_b(int i, int k) const { return off_sup_b + k * (n - 1) + (i - 2); }
  int supcap_b(int i, int k) const { return off_supcap_b + k * (n - 1) + (i - 2); }
  int link_now_a(int i, int kc) const { return off_link_now_a + kc * n + (i - 1); }
  int link_prev_a(int i, int kc) const { return off_link_prev_a + kc * n + (i - 1); }
  int link_now_b(int i, int kc) const { return off_link_now_b + kc * n + (i - 1); }
  int link_prev_b(int i, int kc) const { return off_link_prev_b + kc * n + (i - 1); }
  int jam_a(int i, int k) const { return off_jam_a + k * n + (i - 1); }
  int jam_b(int i, int k) const { return off_jam_b + k * n + (i - 1); }
};

RowIndexMap build_row_map(const Scenario& s);

/// Assembled convex QP: min c'x + 1/2 x'Hx subject to A_i x <= b_i,
/// A_e x = b_e, lb <= x <= ub. `objective_constant` carries the constant
/// dropped from the capacity-reserve term so that objective values are
/// comparable to a direct evaluation of the cost function.
struct QpProblem {
  Eigen::SparseMatrix<double> H;   ///< symmetric PSD (stored full)
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> A_e;
  Eigen::VectorXd b_e;
  Eigen::SparseMatrix<double> A_i;
  Eigen::VectorXd b_i;
  Eigen::VectorXd lb, ub;
  VarIndexMap index_map;
  RowIndexMap row_map;
  double objective_constant = 0.0;

  /// c'x + 1/2 x'Hx (without objective_constant).
  double objective_value(const Eigen::VectorXd& x) const;
};

/// Objective assembly: TTS (linear in densities), applied-sharing reward,
/// time- and space-smoothness penalties, capacity-reserve balancing.
void build_objective(const Scenario& s, const ProjectedDemands& projected, QpProblem& qp);

/// Constraint assembly: conservation equalities, the linearized min-operator
/// inequalities, applied-sharing links, jam-density rows, and variable bounds.
void build_constraints(const Scenario& s, QpProblem& qp);

/// Full assembly (index maps + objective + constraints).
QpProblem build_qp(const Scenario& s, const ProjectedDemands& projected);

/// Solution content read back out of a decision vector.
struct ExtractedSolution {
  SharingPlan plan;            ///< eps from x; eps_a/eps_b re-derived via the min-rule
  Eigen::MatrixXd eps_a_raw;   ///< applied factors as chosen by the QP (n x Kc)
  Eigen::MatrixXd eps_b_raw;
  TrafficTrajectory qp_traj;   ///< QP-implied densities and flows
  double qp_tts = 0.0;         ///< TTS term of the objective evaluated on x
};

ExtractedSolution extract_solution(const Eigen::VectorXd& x, const VarIndexMap& map,
                                   const Scenario& s);

/// Evaluates the full cost function directly from a plan and a trajectory
/// (same value the QP assigns to the corresponding feasible point).
double evaluate_objective(const Scenario& s, const ProjectedDemands& projected,
                          const SharingPlan& plan, const TrafficTrajectory& traj);

/// Packs a plan + trajectory into a decision vector (used to check
/// feasibility of simulated trajectories against the assembled system).
Eigen::VectorXd pack_point(const SharingPlan& plan, const TrafficTrajectory& traj,
                           const VarIndexMap& map);

/// Text interchange dump (triplets + vectors) for third-party cross-checks.
void dump_problem(const QpProblem& qp, std::ostream& os);

}  // namespace ibc

#endif  // IBC_QP_HPP_
