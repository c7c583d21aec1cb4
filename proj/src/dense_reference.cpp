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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "ibc/solver.hpp"

namespace ibc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

// Dense primal-dual reference: same optimality conditions as the sparse
// solver but an independent code path (dense LU elimination, no problem
// scaling, its own starting point). Used to cross-check the primary solver
// on small instances.
QpSolution solve_dense_reference(const QpProblem& qp, const SolverSettings& settings) {
  const int n = static_cast<int>(qp.c.size());
  if (n > kDenseReferenceMaxVars)
    throw std::invalid_argument("problem exceeds the dense reference solver size cap");

  const int me = static_cast<int>(qp.A_e.rows());
  const int mi = static_cast<int>(qp.A_i.rows());

  std::vector<int> ub_idx, lb_idx;
  for (int j = 0; j < n; ++j) {
    if (qp.ub(j) < kInf) ub_idx.push_back(j);
    if (qp.lb(j) > -kInf) lb_idx.push_back(j);
  }
  const int mg = mi + static_cast<int>(ub_idx.size() + lb_idx.size());

  Eigen::MatrixXd P = Eigen::MatrixXd(qp.H);
  Eigen::MatrixXd Ae = Eigen::MatrixXd(qp.A_e);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(mg, n);
  Eigen::VectorXd h(mg);
  if (mi > 0) {
    G.topRows(mi) = Eigen::MatrixXd(qp.A_i);
    h.head(mi) = qp.b_i;
  }
  for (size_t r = 0; r < ub_idx.size(); ++r) {
    G(mi + static_cast<int>(r), ub_idx[r]) = 1.0;
    h(mi + static_cast<int>(r)) = qp.ub(ub_idx[r]);
  }
  for (size_t r = 0; r < lb_idx.size(); ++r) {
    int row = mi + static_cast<int>(ub_idx.size()) + static_cast<int>(r);
    G(row, lb_idx[r]) = -1.0;
    h(row) = -qp.lb(lb_idx[r]);
  }

  QpSolution out;
  const double reg = std::max(settings.kkt_reg, 1e-12);

  // Starting point: one KKT solve with unit slack weighting, shifted to the
  // interior.
  Eigen::VectorXd x(n), y(me), s(mg), z(mg);
  {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + me, n + me);
    M.topLeftCorner(n, n) = P;
    if (mg > 0) M.topLeftCorner(n, n) += G.transpose() * G;
    M.topLeftCorner(n, n) += reg * Eigen::MatrixXd::Identity(n, n);
    if (me > 0) {
      M.topRightCorner(n, me) = Ae.transpose();
      M.bottomLeftCorner(me, n) = Ae;
      M.bottomRightCorner(me, me) -= reg * Eigen::MatrixXd::Identity(me, me);
    }
    Eigen::VectorXd rhs(n + me);
    rhs.head(n) = -qp.c;
    if (mg > 0) rhs.head(n) += G.transpose() * h;
    if (me > 0) rhs.tail(me) = qp.b_e;
    Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(M).solve(rhs);
    x = sol.head(n);
    y = me > 0 ? Eigen::VectorXd(sol.tail(me)) : Eigen::VectorXd(0);
    if (mg > 0) {
      Eigen::VectorXd zt = G * x - h;
      s = -zt;
      double ap = zt.maxCoeff();
      if (ap >= 0.0) s.array() += 1.0 + ap;
      z = zt;
      double ad = (-zt).maxCoeff();
      if (ad >= 0.0) z.array() += 1.0 + ad;
    }
  }

  const double scale_ref =
      1.0 + std::max({inf_norm(qp.c), inf_norm(qp.b_e), mg > 0 ? inf_norm(h) : 0.0});
  const int max_iter = std::min(settings.max_iter, 200);
  const double init_dual = std::max(1.0, std::max(inf_norm(y), mg > 0 ? inf_norm(z) : 0.0));

  Eigen::MatrixXd M(n + me, n + me);
  Eigen::VectorXd rhs(n + me);
  out.status = SolveStatus::MaxIter;

  for (int iter = 1; iter <= max_iter; ++iter) {
    Eigen::VectorXd r_d = P * x + qp.c;
    if (me > 0) r_d += Ae.transpose() * y;
    if (mg > 0) r_d += G.transpose() * z;
    Eigen::VectorXd r_p = me > 0 ? Eigen::VectorXd(Ae * x - qp.b_e) : Eigen::VectorXd(0);
    Eigen::VectorXd r_g = mg > 0 ? Eigen::VectorXd(G * x + s - h) : Eigen::VectorXd(0);
    double mu = mg > 0 ? s.dot(z) / mg : 0.0;
    double total_gap = mg > 0 ? s.dot(z) : 0.0;
    double obj = qp.objective_value(x);

    out.primal_res = std::max(inf_norm(r_p), inf_norm(r_g));
    out.dual_res = inf_norm(r_d);
    out.comp_gap = mu;
    out.iterations = iter - 1;

    double pri_scale = std::max({me > 0 ? inf_norm(Ae * x) : 0.0, inf_norm(qp.b_e),
                                 mg > 0 ? inf_norm(G * x) : 0.0,
                                 mg > 0 ? inf_norm(h) : 0.0});
    double dua_scale = std::max({inf_norm(P * x), inf_norm(qp.c),
                                 me > 0 ? inf_norm(Ae.transpose() * y) : 0.0,
                                 mg > 0 ? inf_norm(G.transpose() * z) : 0.0});
    if (out.primal_res <= settings.eps_abs + settings.eps_rel * pri_scale &&
        out.dual_res <= settings.eps_abs + settings.eps_rel * dua_scale &&
        total_gap <= settings.eps_abs + settings.eps_rel * std::abs(obj)) {
      out.status = SolveStatus::Optimal;
      break;
    }

    double dual_norm = std::max(inf_norm(y), mg > 0 ? inf_norm(z) : 0.0);
    if (dual_norm > 1e13 * init_dual) {
      // Farkas-type certificate of primal infeasibility.
      Eigen::VectorXd yn = me > 0 ? Eigen::VectorXd(y / dual_norm) : Eigen::VectorXd(0);
      Eigen::VectorXd zn = mg > 0 ? Eigen::VectorXd(z / dual_norm) : Eigen::VectorXd(0);
      Eigen::VectorXd ray = Eigen::VectorXd::Zero(n);
      if (me > 0) ray += Ae.transpose() * yn;
      if (mg > 0) ray += G.transpose() * zn;
      double support = (me > 0 ? qp.b_e.dot(yn) : 0.0) + (mg > 0 ? h.dot(zn) : 0.0);
      out.status = (inf_norm(ray) <= 1e-6 && support <= -1e-9)
                       ? SolveStatus::PrimalInfeasible
                       : SolveStatus::MaxIter;
      break;
    }
    if (qp.objective_value(x) < -1e14 * scale_ref) {
      out.status = SolveStatus::DualInfeasible;
      break;
    }

    M.setZero();
    M.topLeftCorner(n, n) = P;
    Eigen::VectorXd w;
    if (mg > 0) {
      w = z.cwiseQuotient(s);
      M.topLeftCorner(n, n) += G.transpose() * w.asDiagonal() * G;
    }
    M.topLeftCorner(n, n) += reg * Eigen::MatrixXd::Identity(n, n);
    if (me > 0) {
      M.topRightCorner(n, me) = Ae.transpose();
      M.bottomLeftCorner(me, n) = Ae;
      M.bottomRightCorner(me, me) -= reg * Eigen::MatrixXd::Identity(me, me);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);

    auto newton = [&](const Eigen::VectorXd& r_c) {
      rhs.head(n) = -r_d;
      if (mg > 0)
        rhs.head(n) += G.transpose() * (r_c.cwiseQuotient(s)) -
                       G.transpose() * (w.cwiseProduct(r_g));
      if (me > 0) rhs.tail(me) = -r_p;
      Eigen::VectorXd sol = lu.solve(rhs);
      Eigen::VectorXd dx = sol.head(n);
      Eigen::VectorXd dy = me > 0 ? Eigen::VectorXd(sol.tail(me)) : Eigen::VectorXd(0);
      Eigen::VectorXd ds(mg), dz(mg);
      if (mg > 0) {
        ds = -r_g - G * dx;
        dz = -(r_c + z.cwiseProduct(ds)).cwiseQuotient(s);
      }
      return std::make_tuple(dx, dy, ds, dz);
    };
    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    Eigen::VectorXd corr = Eigen::VectorXd::Zero(mg);
    if (mg > 0) {
      auto [dxa, dya, dsa, dza] = newton(s.cwiseProduct(z));
      double ap = max_step(s, dsa);
      double ad = max_step(z, dza);
      double mu_aff = (s + ap * dsa).dot(z + ad * dza) / mg;
      double sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 0.0, 1.0);
      corr = s.cwiseProduct(z) + dsa.cwiseProduct(dza) -
             Eigen::VectorXd::Constant(mg, sigma * mu);
    }

    auto [dx, dy, ds, dz] = newton(corr);
    double a = 1.0;
    if (mg > 0) a = 0.99 * std::min(max_step(s, ds), max_step(z, dz));
    x += a * dx;
    if (me > 0) y += a * dy;
    if (mg > 0) {
      s += a * ds;
      z += a * dz;
    }

    if (iter == max_iter) out.iterations = iter;
  }

  out.x = x;
  out.y_eq = y;
  out.y_bound = Eigen::VectorXd::Zero(n);
  if (mg > 0) {
    out.y_ineq = z.head(mi);
    for (size_t r = 0; r < ub_idx.size(); ++r)
      out.y_bound(ub_idx[r]) += z(mi + static_cast<int>(r));
    for (size_t r = 0; r < lb_idx.size(); ++r)
      out.y_bound(lb_idx[r]) -=
          z(mi + static_cast<int>(ub_idx.size()) + static_cast<int>(r));
  } else {
    out.y_ineq = Eigen::VectorXd::Zero(mi);
  }
  out.objective = qp.objective_value(x);
  return out;
}

}  // namespace ibc
