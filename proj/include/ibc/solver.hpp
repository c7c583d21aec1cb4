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

#ifndef IBC_SOLVER_HPP_
#define IBC_SOLVER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ibc/qp.hpp"

namespace ibc {

/// Solver settings. Termination is purely residual/iteration based so that
/// identical inputs give identical iterate sequences.
struct SolverSettings {
  double eps_abs = 1e-8;    ///< absolute residual/gap tolerance (unscaled)
  double eps_rel = 1e-8;    ///< relative residual/gap tolerance
  int max_iter = 200;       ///< interior-point iteration cap
  bool polish = true;       ///< active-set refinement of the converged iterate
  double kkt_reg = 1e-9;    ///< static KKT regularization
  int scaling_iters = 10;   ///< diagonal equilibration passes (0 disables)
  bool verbose = false;
};

enum class SolveStatus { Optimal, MaxIter, PrimalInfeasible, DualInfeasible };

const char* to_string(SolveStatus status);

struct QpSolution {
  Eigen::VectorXd x;        ///< primal
  Eigen::VectorXd y_eq;     ///< duals of equality rows
  Eigen::VectorXd y_ineq;   ///< duals of inequality rows (>= 0)
  Eigen::VectorXd y_bound;  ///< duals of variable bounds (upper minus lower)
  double objective = 0.0;   ///< c'x + 1/2 x'Hx (without the dropped constant)
  SolveStatus status = SolveStatus::MaxIter;
  double primal_res = 0.0;  ///< unscaled infinity-norm primal residual
  double dual_res = 0.0;    ///< unscaled infinity-norm dual residual
  double comp_gap = 0.0;    ///< mean complementarity at exit
  int iterations = 0;
  bool polished = false;
  double solve_time_s = 0.0;  ///< informative only; never drives control flow
};

/// Primary solver: sparse primal-dual interior-point (Mehrotra
/// predictor-corrector) with diagonal equilibration and optional active-set
/// polish. Deterministic for fixed settings.
QpSolution solve(const QpProblem& qp, const SolverSettings& settings = {});

/// Dense reference solver used to cross-check the sparse path on small
/// instances: independent implementation on dense factorizations with its
/// own starting point and elimination order. Throws std::invalid_argument
/// above the documented size cap.
QpSolution solve_dense_reference(const QpProblem& qp, const SolverSettings& settings = {});

/// Size cap for the dense reference solver (decision variables).
inline constexpr int kDenseReferenceMaxVars = 2000;

/// Exhaustive sharing-factor search for desk-scale instances: simulates the
/// CTM for every grid point and evaluates the cost function exactly.
struct GridOracleResult {
  Eigen::MatrixXd best_eps;   ///< n x Kc
  double best_objective = 0.0;
  std::int64_t evaluations = 0;
};

GridOracleResult grid_oracle(const Scenario& s, double grid_step,
                             std::int64_t max_evals = 2000000);

/// A flow strictly below every branch of its min-operator bound: traffic the
/// QP held back relative to what the model would let through.
struct HoldingBackFlag {
  char direction = 'a';
  int section = 0;   ///< 1-based
  int k = 0;         ///< model step
  double slack = 0;  ///< distance to the tightest bound (veh/h)
};

struct HoldingBackReport {
  std::vector<HoldingBackFlag> flags;
  double max_slack = 0.0;  ///< over all flows, flagged or not
};

/// Flags flows in an extracted QP solution that sit below all of their
/// demand/supply bounds by more than `tol` (veh/h).
HoldingBackReport detect_holding_back(const Scenario& s, const ExtractedSolution& sol,
                                      double tol = 1.0);

/// Writes a solution dump (x, duals, residuals) in the same interchange
/// format family as dump_problem.
void dump_solution(const QpSolution& sol, std::ostream& os);

}  // namespace ibc

#endif  // IBC_SOLVER_HPP_
