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

#include "ibc/solver.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <ostream>
#include <tuple>
#include <vector>

#include "ibc/io.hpp"

namespace ibc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinScale = 1e-4;
constexpr double kMaxScale = 1e4;
constexpr double kDualBlowup = 1e13;

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

/// Problem in slack form: min 1/2 x'Px + q'x s.t. Ae x = be, G x <= h,
/// where G stacks the inequality rows and the finite variable bounds.
struct SlackForm {
  Eigen::SparseMatrix<double> P;
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> Ae;
  Eigen::VectorXd be;
  Eigen::SparseMatrix<double> G;
  Eigen::VectorXd h;
  int n = 0, me = 0, mi = 0, mg = 0;
  std::vector<int> ub_idx, lb_idx;  // bound rows appended after the mi rows
};

SlackForm to_slack_form(const QpProblem& qp) {
  SlackForm f;
  f.n = static_cast<int>(qp.c.size());
  f.me = static_cast<int>(qp.A_e.rows());
  f.mi = static_cast<int>(qp.A_i.rows());
  f.P = qp.H;
  f.q = qp.c;
  f.Ae = qp.A_e;
  f.be = qp.b_e;
  for (int j = 0; j < f.n; ++j) {
    if (qp.ub(j) < kInf) f.ub_idx.push_back(j);
    if (qp.lb(j) > -kInf) f.lb_idx.push_back(j);
  }
  f.mg = f.mi + static_cast<int>(f.ub_idx.size() + f.lb_idx.size());

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(qp.A_i.nonZeros() + f.ub_idx.size() + f.lb_idx.size());
  for (int o = 0; o < qp.A_i.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.A_i, o); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  f.h.resize(f.mg);
  f.h.head(f.mi) = qp.b_i;
  int row = f.mi;
  for (int j : f.ub_idx) {
    trip.emplace_back(row, j, 1.0);
    f.h(row++) = qp.ub(j);
  }
  for (int j : f.lb_idx) {
    trip.emplace_back(row, j, -1.0);
    f.h(row++) = -qp.lb(j);
  }
  f.G.resize(f.mg, f.n);
  f.G.setFromTriplets(trip.begin(), trip.end());
  f.G.makeCompressed();
  return f;
}

struct Scaling {
  Eigen::VectorXd D;       // variable scaling
  Eigen::VectorXd Ee, Eg;  // row scalings of the equality / inequality blocks
  double cost = 1.0;
};

/// Modified Ruiz equilibration of [[P, Ae', G'], [Ae, 0, 0], [G, 0, 0]]
/// plus cost normalization.
Scaling equilibrate(SlackForm& f, int iters) {
  Scaling s;
  s.D = Eigen::VectorXd::Ones(f.n);
  s.Ee = Eigen::VectorXd::Ones(f.me);
  s.Eg = Eigen::VectorXd::Ones(f.mg);
  if (iters <= 0) return s;

  for (int pass = 0; pass < iters; ++pass) {
    Eigen::VectorXd cn = Eigen::VectorXd::Zero(f.n);
    Eigen::VectorXd rne = Eigen::VectorXd::Zero(f.me);
    Eigen::VectorXd rng = Eigen::VectorXd::Zero(f.mg);
    for (int o = 0; o < f.P.outerSize(); ++o)
      for (Eigen::SparseMatrix<double>::InnerIterator it(f.P, o); it; ++it)
        cn(it.col()) = std::max(cn(it.col()), std::abs(it.value()));
    for (int o = 0; o < f.Ae.outerSize(); ++o)
      for (Eigen::SparseMatrix<double>::InnerIterator it(f.Ae, o); it; ++it) {
        cn(it.col()) = std::max(cn(it.col()), std::abs(it.value()));
        rne(it.row()) = std::max(rne(it.row()), std::abs(it.value()));
      }
    for (int o = 0; o < f.G.outerSize(); ++o)
      for (Eigen::SparseMatrix<double>::InnerIterator it(f.G, o); it; ++it) {
        cn(it.col()) = std::max(cn(it.col()), std::abs(it.value()));
        rng(it.row()) = std::max(rng(it.row()), std::abs(it.value()));
      }

    Eigen::VectorXd dv(f.n), ee(f.me), eg(f.mg);
    auto factor = [](double norm) {
      return norm > 0.0 ? 1.0 / std::sqrt(std::clamp(norm, kMinScale, kMaxScale)) : 1.0;
    };
    for (int j = 0; j < f.n; ++j) dv(j) = factor(cn(j));
    for (int i = 0; i < f.me; ++i) ee(i) = factor(rne(i));
    for (int i = 0; i < f.mg; ++i) eg(i) = factor(rng(i));

    f.P = dv.asDiagonal() * f.P * dv.asDiagonal();
    f.Ae = ee.asDiagonal() * f.Ae * dv.asDiagonal();
    f.G = eg.asDiagonal() * f.G * dv.asDiagonal();
    f.q = dv.cwiseProduct(f.q);
    s.D = s.D.cwiseProduct(dv);
    s.Ee = s.Ee.cwiseProduct(ee);
    s.Eg = s.Eg.cwiseProduct(eg);

    Eigen::VectorXd cn2 = Eigen::VectorXd::Zero(f.n);
    for (int o = 0; o < f.P.outerSize(); ++o)
      for (Eigen::SparseMatrix<double>::InnerIterator it(f.P, o); it; ++it)
        cn2(it.col()) = std::max(cn2(it.col()), std::abs(it.value()));
    double gamma = std::max(cn2.sum() / f.n, inf_norm(f.q));
    gamma = gamma > 0.0 ? 1.0 / std::clamp(gamma, kMinScale, kMaxScale) : 1.0;
    f.P *= gamma;
    f.q *= gamma;
    s.cost *= gamma;
  }
  f.be = s.Ee.cwiseProduct(f.be);
  f.h = s.Eg.cwiseProduct(f.h);
  return s;
}

Eigen::SparseMatrix<double> build_reduced_kkt(const SlackForm& f,
                                              const Eigen::VectorXd& w, double reg) {
  // [[P + reg I + G' W G, Ae'], [Ae, -reg I]] with W = diag(w).
  Eigen::SparseMatrix<double> gtwg;
  if (f.mg > 0) {
    gtwg = f.G.transpose() * w.asDiagonal() * f.G;
  } else {
    gtwg.resize(f.n, f.n);
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(f.P.nonZeros() + gtwg.nonZeros() + 2 * f.Ae.nonZeros() + f.n + f.me);
  for (int o = 0; o < f.P.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(f.P, o); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int o = 0; o < gtwg.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(gtwg, o); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int j = 0; j < f.n; ++j) trip.emplace_back(j, j, reg);
  for (int o = 0; o < f.Ae.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(f.Ae, o); it; ++it) {
      trip.emplace_back(f.n + static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
      trip.emplace_back(static_cast<int>(it.col()), f.n + static_cast<int>(it.row()),
                        it.value());
    }
  for (int i = 0; i < f.me; ++i) trip.emplace_back(f.n + i, f.n + i, -reg);
  Eigen::SparseMatrix<double> kkt(f.n + f.me, f.n + f.me);
  kkt.setFromTriplets(trip.begin(), trip.end());
  kkt.makeCompressed();
  return kkt;
}

struct BoxProblem {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd l, u;
  int n = 0, m = 0, n_eq = 0, n_ineq = 0;
};

BoxProblem to_box_form(const QpProblem& qp) {
  BoxProblem b;
  b.n = static_cast<int>(qp.c.size());
  b.n_eq = static_cast<int>(qp.A_e.rows());
  b.n_ineq = static_cast<int>(qp.A_i.rows());
  b.m = b.n_eq + b.n_ineq + b.n;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(qp.A_e.nonZeros() + qp.A_i.nonZeros() + b.n);
  for (int o = 0; o < qp.A_e.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.A_e, o); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int o = 0; o < qp.A_i.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.A_i, o); it; ++it)
      trip.emplace_back(b.n_eq + static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
  for (int j = 0; j < b.n; ++j) trip.emplace_back(b.n_eq + b.n_ineq + j, j, 1.0);
  b.A.resize(b.m, b.n);
  b.A.setFromTriplets(trip.begin(), trip.end());
  b.A.makeCompressed();

  b.l.resize(b.m);
  b.u.resize(b.m);
  b.l.head(b.n_eq) = qp.b_e;
  b.u.head(b.n_eq) = qp.b_e;
  b.l.segment(b.n_eq, b.n_ineq).setConstant(-kInf);
  b.u.segment(b.n_eq, b.n_ineq) = qp.b_i;
  b.l.tail(b.n) = qp.lb;
  b.u.tail(b.n) = qp.ub;
  return b;
}

struct PolishResult {
  bool ok = false;
  Eigen::VectorXd x, y;
  double primal_res = 0.0, dual_res = 0.0;
  double min_ineq_dual = 0.0;  // most negative dual on an active inequality
};

/// Active-set refinement on the unscaled problem: solve the KKT system of
/// the given active rows, with light regularization and iterative
/// refinement. `act` lists box-form rows; negative entries mean the row is
/// active at its lower bound.
PolishResult polish(const QpProblem& qp, const BoxProblem& orig,
                    const std::vector<int>& act_lower, const std::vector<int>& act_upper,
                    double delta) {
  PolishResult res;
  const int n = orig.n;
  std::vector<int> act;
  std::vector<double> act_rhs;
  std::vector<int> act_sign;  // -1 lower, +1 upper, 0 equality
  for (int i = 0; i < orig.n_eq; ++i) {
    act.push_back(i);
    act_rhs.push_back(orig.l(i));
    act_sign.push_back(0);
  }
  for (int i : act_lower) {
    act.push_back(i);
    act_rhs.push_back(orig.l(i));
    act_sign.push_back(-1);
  }
  for (int i : act_upper) {
    act.push_back(i);
    act_rhs.push_back(orig.u(i));
    act_sign.push_back(+1);
  }
  const int na = static_cast<int>(act.size());

  std::vector<Eigen::Triplet<double>> trip, trip_reg;
  for (int o = 0; o < qp.H.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.H, o); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  Eigen::SparseMatrix<double> At = orig.A.transpose();
  for (int a = 0; a < na; ++a) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(At, act[a]); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), n + a, it.value());
      trip.emplace_back(n + a, static_cast<int>(it.row()), it.value());
    }
  }
  trip_reg = trip;
  for (int j = 0; j < n; ++j) trip_reg.emplace_back(j, j, delta);
  for (int a = 0; a < na; ++a) trip_reg.emplace_back(n + a, n + a, -delta);

  Eigen::SparseMatrix<double> kkt(n + na, n + na), kkt_reg(n + na, n + na);
  kkt.setFromTriplets(trip.begin(), trip.end());
  kkt_reg.setFromTriplets(trip_reg.begin(), trip_reg.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(kkt_reg);
  if (ldlt.info() != Eigen::Success) return res;

  Eigen::VectorXd rhs(n + na);
  rhs.head(n) = -qp.c;
  for (int a = 0; a < na; ++a) rhs(n + a) = act_rhs[a];

  // Iterative refinement against the unregularized system; a redundant
  // active set makes that system singular, so keep the best iterate rather
  // than trusting the final one.
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n + na);
  Eigen::VectorXd best = t;
  double best_res = inf_norm(rhs);
  for (int pass = 0; pass < 6; ++pass) {
    Eigen::VectorXd residual = rhs - kkt * t;
    double res_norm = inf_norm(residual);
    if (res_norm < best_res) {
      best_res = res_norm;
      best = t;
    }
    t += ldlt.solve(residual);
  }
  if (inf_norm(rhs - kkt * t) >= best_res) t = best;

  res.x = t.head(n);
  res.y = Eigen::VectorXd::Zero(orig.m);
  for (int a = 0; a < na; ++a) res.y(act[a]) = t(n + a);

  // Sign sanity of the recovered multipliers: active-at-upper rows need
  // y >= 0, active-at-lower rows y <= 0.
  res.min_ineq_dual = 0.0;
  for (int a = 0; a < na; ++a) {
    if (act_sign[a] > 0) res.min_ineq_dual = std::min(res.min_ineq_dual, t(n + a));
    if (act_sign[a] < 0) res.min_ineq_dual = std::min(res.min_ineq_dual, -t(n + a));
  }

  Eigen::VectorXd Ax = orig.A * res.x;
  double rp = 0.0;
  for (int i = 0; i < orig.m; ++i) {
    rp = std::max(rp, std::max(orig.l(i) - Ax(i), Ax(i) - orig.u(i)));
  }
  res.primal_res = std::max(rp, 0.0);
  res.dual_res = inf_norm(qp.H * res.x + qp.c + orig.A.transpose() * res.y);
  res.ok = std::isfinite(res.primal_res) && std::isfinite(res.dual_res);
  return res;
}

struct IpmWork {
  Eigen::VectorXd x, y, s, z;  // scaled iterates
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
};

/// Mehrotra predictor-corrector on the equilibrated slack form. The KKT
/// pattern is fixed, so symbolic analysis happens once.
IpmWork run_ipm(const SlackForm& f, const SlackForm& orig, const Scaling& sc,
                const SolverSettings& st, double* out_rp, double* out_rd,
                double* out_gap) {
  IpmWork w;
  const int n = f.n, me = f.me, mg = f.mg;
  const double reg = st.kkt_reg;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  {
    Eigen::VectorXd w1 = Eigen::VectorXd::Ones(mg);
    Eigen::SparseMatrix<double> kkt0 = build_reduced_kkt(f, w1, std::max(reg, 1e-9));
    ldlt.analyzePattern(kkt0);
    ldlt.factorize(kkt0);
    if (ldlt.info() != Eigen::Success) {
      w.status = SolveStatus::MaxIter;
      w.x = Eigen::VectorXd::Zero(n);
      w.y = Eigen::VectorXd::Zero(me);
      w.s = Eigen::VectorXd::Ones(mg);
      w.z = Eigen::VectorXd::Ones(mg);
      return w;
    }
    // Starting point from one least-squares KKT solve with unit slack
    // weighting, then shifted to the interior.
    Eigen::VectorXd rhs(n + me);
    rhs.head(n) = -f.q;
    if (mg > 0) rhs.head(n) += f.G.transpose() * f.h;
    rhs.tail(me) = f.be;
    Eigen::VectorXd sol = ldlt.solve(rhs);
    w.x = sol.head(n);
    w.y = sol.tail(me);
    if (mg > 0) {
      Eigen::VectorXd zt = f.G * w.x - f.h;
      w.s = -zt;
      double ap = zt.maxCoeff();
      if (ap >= 0.0) w.s.array() += 1.0 + ap;
      w.z = zt;
      double ad = (-zt).maxCoeff();
      if (ad >= 0.0) w.z.array() += 1.0 + ad;
    } else {
      w.s.resize(0);
      w.z.resize(0);
    }
  }

  const double init_dual_norm = std::max(1.0, std::max(inf_norm(w.y), inf_norm(w.z)));
  Eigen::VectorXd rhs(n + me);

  for (int iter = 1; iter <= st.max_iter; ++iter) {
    w.iterations = iter - 1;

    // Unscaled residuals drive termination and reporting.
    Eigen::VectorXd xu = sc.D.cwiseProduct(w.x);
    Eigen::VectorXd yu = sc.Ee.cwiseProduct(w.y) / sc.cost;
    Eigen::VectorXd zu = mg > 0 ? Eigen::VectorXd(sc.Eg.cwiseProduct(w.z) / sc.cost)
                                : Eigen::VectorXd(0);
    Eigen::VectorXd su = mg > 0 ? Eigen::VectorXd(w.s.cwiseQuotient(sc.Eg))
                                : Eigen::VectorXd(0);

    Eigen::VectorXd Px = orig.P * xu;
    Eigen::VectorXd rd = Px + orig.q;
    if (me > 0) rd += orig.Ae.transpose() * yu;
    if (mg > 0) rd += orig.G.transpose() * zu;
    Eigen::VectorXd rpe = me > 0 ? Eigen::VectorXd(orig.Ae * xu - orig.be)
                                 : Eigen::VectorXd(0);
    Eigen::VectorXd Gx = mg > 0 ? Eigen::VectorXd(orig.G * xu) : Eigen::VectorXd(0);
    Eigen::VectorXd rpg = mg > 0 ? Eigen::VectorXd(Gx + su - orig.h) : Eigen::VectorXd(0);
    double gap = mg > 0 ? su.dot(zu) : 0.0;
    double obj = 0.5 * xu.dot(Px) + orig.q.dot(xu);

    double rp_norm = std::max(inf_norm(rpe), inf_norm(rpg));
    double rd_norm = inf_norm(rd);
    double pri_scale = std::max({me > 0 ? inf_norm(orig.Ae * xu) : 0.0,
                                 inf_norm(orig.be), inf_norm(Gx), inf_norm(orig.h),
                                 inf_norm(su)});
    double dua_scale = std::max({inf_norm(Px), inf_norm(orig.q),
                                 me > 0 ? inf_norm(orig.Ae.transpose() * yu) : 0.0,
                                 mg > 0 ? inf_norm(orig.G.transpose() * zu) : 0.0});
    *out_rp = rp_norm;
    *out_rd = rd_norm;
    *out_gap = mg > 0 ? gap / mg : 0.0;

    if (st.verbose) {
      std::cout << "ipm iter " << iter - 1 << " rp " << rp_norm << " rd " << rd_norm
                << " gap " << gap << " obj " << obj << "\n";
    }

    bool pri_ok = rp_norm <= st.eps_abs + st.eps_rel * pri_scale;
    bool dua_ok = rd_norm <= st.eps_abs + st.eps_rel * dua_scale;
    bool gap_ok = gap <= st.eps_abs + st.eps_rel * std::abs(obj);
    if (pri_ok && dua_ok && gap_ok) {
      w.status = SolveStatus::Optimal;
      return w;
    }

    // Diverging duals: test a Farkas-type certificate of an empty feasible
    // set before giving up.
    double dual_norm = std::max(inf_norm(yu), inf_norm(zu));
    if (dual_norm > kDualBlowup * init_dual_norm) {
      Eigen::VectorXd yn = yu / dual_norm;
      Eigen::VectorXd zn = mg > 0 ? Eigen::VectorXd(zu / dual_norm) : Eigen::VectorXd(0);
      Eigen::VectorXd ray = Eigen::VectorXd::Zero(n);
      if (me > 0) ray += orig.Ae.transpose() * yn;
      if (mg > 0) ray += orig.G.transpose() * zn;
      double support = (me > 0 ? orig.be.dot(yn) : 0.0) + (mg > 0 ? orig.h.dot(zn) : 0.0);
      if (inf_norm(ray) <= 1e-6 && support <= -1e-9) {
        w.status = SolveStatus::PrimalInfeasible;
      } else {
        w.status = SolveStatus::MaxIter;
      }
      return w;
    }
    if (obj < -1e14 * std::max(1.0, inf_norm(orig.q))) {
      w.status = SolveStatus::DualInfeasible;
      return w;
    }

    // Scaled residuals for the Newton system.
    Eigen::VectorXd rd_s = f.P * w.x + f.q;
    if (me > 0) rd_s += f.Ae.transpose() * w.y;
    if (mg > 0) rd_s += f.G.transpose() * w.z;
    Eigen::VectorXd rpe_s = me > 0 ? Eigen::VectorXd(f.Ae * w.x - f.be)
                                   : Eigen::VectorXd(0);
    Eigen::VectorXd rpg_s =
        mg > 0 ? Eigen::VectorXd(f.G * w.x + w.s - f.h) : Eigen::VectorXd(0);
    double mu = mg > 0 ? w.s.dot(w.z) / mg : 0.0;

    Eigen::VectorXd wt = mg > 0 ? Eigen::VectorXd(w.z.cwiseQuotient(w.s))
                                : Eigen::VectorXd(0);
    // Escalate the static regularization if the quasidefinite factorization
    // breaks down (ill-conditioned endgame scaling).
    bool factored = false;
    for (int attempt = 0; attempt < 4 && !factored; ++attempt) {
      double reg_now = reg * std::pow(100.0, attempt);
      Eigen::SparseMatrix<double> kkt = build_reduced_kkt(f, wt, reg_now);
      ldlt.factorize(kkt);
      factored = ldlt.info() == Eigen::Success;
    }
    if (!factored) {
      w.status = SolveStatus::MaxIter;
      return w;
    }

    auto newton = [&](const Eigen::VectorXd& r_c) {
      rhs.head(n) = -rd_s;
      if (mg > 0)
        rhs.head(n) += f.G.transpose() * (r_c.cwiseQuotient(w.s)) -
                       f.G.transpose() * (wt.cwiseProduct(rpg_s));
      if (me > 0) rhs.tail(me) = -rpe_s;
      Eigen::VectorXd sol = ldlt.solve(rhs);
      Eigen::VectorXd dx = sol.head(n);
      Eigen::VectorXd dy = me > 0 ? Eigen::VectorXd(sol.tail(me)) : Eigen::VectorXd(0);
      Eigen::VectorXd ds(mg), dz(mg);
      if (mg > 0) {
        ds = -rpg_s - f.G * dx;
        dz = -(r_c + w.z.cwiseProduct(ds)).cwiseQuotient(w.s);
      }
      return std::make_tuple(dx, dy, ds, dz);
    };
    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    double sigma = 0.0;
    Eigen::VectorXd corr = Eigen::VectorXd::Zero(mg);
    if (mg > 0) {
      auto [dxa, dya, dsa, dza] = newton(w.s.cwiseProduct(w.z));
      double ap = max_step(w.s, dsa);
      double ad = max_step(w.z, dza);
      double mu_aff = (w.s + ap * dsa).dot(w.z + ad * dza) / mg;
      sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 0.0, 1.0);
      corr = w.s.cwiseProduct(w.z) + dsa.cwiseProduct(dza) -
             Eigen::VectorXd::Constant(mg, sigma * mu);
    }

    auto [dx, dy, ds, dz] = newton(corr);
    double a = 1.0;
    if (mg > 0) a = 0.99 * std::min(max_step(w.s, ds), max_step(w.z, dz));
    w.x += a * dx;
    if (me > 0) w.y += a * dy;
    if (mg > 0) {
      w.s += a * ds;
      w.z += a * dz;
    }
  }

  w.iterations = st.max_iter;
  w.status = SolveStatus::MaxIter;
  return w;
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
  }
  return "unknown";
}

QpSolution solve(const QpProblem& qp, const SolverSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();

  SlackForm orig = to_slack_form(qp);
  SlackForm scaled = orig;
  Scaling sc = equilibrate(scaled, settings.scaling_iters);

  QpSolution out;
  double rp = 0.0, rd = 0.0, gap = 0.0;
  IpmWork w = run_ipm(scaled, orig, sc, settings, &rp, &rd, &gap);

  out.x = sc.D.cwiseProduct(w.x);
  Eigen::VectorXd y_eq = sc.Ee.cwiseProduct(w.y) / sc.cost;
  Eigen::VectorXd z =
      orig.mg > 0 ? Eigen::VectorXd(sc.Eg.cwiseProduct(w.z) / sc.cost) : Eigen::VectorXd(0);
  out.status = w.status;
  out.iterations = w.iterations;
  out.primal_res = rp;
  out.dual_res = rd;
  out.comp_gap = gap;

  // Map inequality/bound duals into box-form duals for the polish step and
  // for reporting.
  Eigen::VectorXd y_bound = Eigen::VectorXd::Zero(orig.n);
  {
    int row = orig.mi;
    for (int j : orig.ub_idx) y_bound(j) += z(row++);
    for (int j : orig.lb_idx) y_bound(j) -= z(row++);
  }

  // Active-set polish. Refines an optimal iterate to machine precision and
  // can finish a run whose interior-point endgame stalled, as long as the
  // complementarity pattern identifies a consistent active set.
  if (settings.polish && orig.mg > 0 &&
      (out.status == SolveStatus::Optimal || out.status == SolveStatus::MaxIter)) {
    Eigen::VectorXd su = w.s.cwiseQuotient(sc.Eg);
    Eigen::VectorXd zu = sc.Eg.cwiseProduct(w.z) / sc.cost;

    BoxProblem box = to_box_form(qp);
    double bound_scale = 0.0;
    for (int r = 0; r < box.m; ++r) {
      if (std::isfinite(box.l(r))) bound_scale = std::max(bound_scale, std::abs(box.l(r)));
      if (std::isfinite(box.u(r))) bound_scale = std::max(bound_scale, std::abs(box.u(r)));
    }

    // The activity test z > t*s needs a margin on degenerate problems; walk
    // a fixed threshold ladder and keep the first KKT-consistent refinement.
    for (double threshold : {1e6, 1e3, 1.0}) {
      std::vector<int> act_lower, act_upper;
      for (int r = 0; r < orig.mi; ++r) {
        if (zu(r) > threshold * su(r)) act_upper.push_back(box.n_eq + r);
      }
      int row = orig.mi;
      for (int j : orig.ub_idx) {
        if (zu(row) > threshold * su(row))
          act_upper.push_back(box.n_eq + box.n_ineq + j);
        ++row;
      }
      for (int j : orig.lb_idx) {
        if (zu(row) > threshold * su(row))
          act_lower.push_back(box.n_eq + box.n_ineq + j);
        ++row;
      }

      PolishResult pol = polish(qp, box, act_lower, act_upper, 1e-9);
      if (settings.verbose) {
        std::cout << "polish t=" << threshold << ": ok=" << pol.ok
                  << " rp=" << pol.primal_res << " rd=" << pol.dual_res
                  << " min_dual=" << pol.min_ineq_dual
                  << " actives=" << act_lower.size() + act_upper.size() << "\n";
      }
      if (!pol.ok) continue;

      double sign_tol = 1e-7 * (1.0 + inf_norm(pol.y));
      Eigen::VectorXd Px = qp.H * pol.x;
      double pri_scale = std::max(inf_norm(box.A * pol.x), bound_scale);
      double dua_scale = std::max({inf_norm(Px), inf_norm(qp.c),
                                   inf_norm(box.A.transpose() * pol.y)});
      bool meets = pol.primal_res <= settings.eps_abs + settings.eps_rel * pri_scale &&
                   pol.dual_res <= settings.eps_abs + settings.eps_rel * dua_scale &&
                   pol.min_ineq_dual >= -sign_tol;
      bool not_worse =
          std::max(pol.primal_res, pol.dual_res) <= std::max(out.primal_res, out.dual_res) &&
          pol.min_ineq_dual >= -sign_tol;
      if ((out.status == SolveStatus::Optimal && (not_worse || meets)) ||
          (out.status == SolveStatus::MaxIter && meets)) {
        out.x = pol.x;
        y_eq = pol.y.head(box.n_eq);
        z.head(orig.mi) = pol.y.segment(box.n_eq, box.n_ineq);
        y_bound = pol.y.tail(box.n);
        out.primal_res = pol.primal_res;
        out.dual_res = pol.dual_res;
        out.comp_gap = 0.0;
        out.polished = true;
        out.status = SolveStatus::Optimal;
        break;
      }
    }
  }

  out.y_eq = y_eq;
  out.y_ineq = orig.mi > 0 ? Eigen::VectorXd(z.head(orig.mi)) : Eigen::VectorXd(0);
  out.y_bound = y_bound;
  out.objective = qp.objective_value(out.x);
  out.solve_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void dump_solution(const QpSolution& sol, std::ostream& os) {
  os << "ibc-qp-solution 1\n";
  os << "status " << to_string(sol.status) << "\n";
  os << "objective " << format_double(sol.objective) << "\n";
  os << "iterations " << sol.iterations << "\n";
  os << "primal_res " << format_double(sol.primal_res) << "\n";
  os << "dual_res " << format_double(sol.dual_res) << "\n";
  os << "comp_gap " << format_double(sol.comp_gap) << "\n";
  os << "polished " << (sol.polished ? 1 : 0) << "\n";
  auto dump_vec = [&os](const char* name, const Eigen::VectorXd& v) {
    os << name << " " << v.size() << "\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << format_double(v(i)) << "\n";
  };
  dump_vec("x", sol.x);
  dump_vec("y_eq", sol.y_eq);
  dump_vec("y_ineq", sol.y_ineq);
  dump_vec("y_bound", sol.y_bound);
}

}  // namespace ibc
