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

#include "ibc/qp.hpp"

#include <ostream>
#include <stdexcept>
#include <vector>

#include "ibc/io.hpp"

namespace ibc {

VarIndexMap build_index_map(const Scenario& s) {
  VarIndexMap m;
  m.n = s.n();
  m.K = s.K();
  m.Kc = s.Kc();
  const int nK = m.n * m.K;
  const int nKc = m.n * m.Kc;
  m.off_rho_a = 0;
  m.off_rho_b = m.off_rho_a + nK;
  m.off_q_a = m.off_rho_b + nK;
  m.off_q_b = m.off_q_a + nK;
  m.off_eps = m.off_q_b + nK;
  m.off_eps_a = m.off_eps + nKc;
  m.off_eps_b = m.off_eps_a + nKc;
  m.total_vars = m.off_eps_b + nKc;
  return m;
}

VarIndexMap::Entry VarIndexMap::decode(int idx) const {
  auto split = [&](int rel, VarFamily fam, int k_base) {
    return Entry{fam, rel % n + 1, rel / n + k_base};
  };
  if (idx < 0) throw std::out_of_range("variable index out of range");
  if (idx < off_rho_b) return split(idx - off_rho_a, VarFamily::RhoA, 1);
  if (idx < off_q_a) return split(idx - off_rho_b, VarFamily::RhoB, 1);
  if (idx < off_q_b) return split(idx - off_q_a, VarFamily::QA, 0);
  if (idx < off_eps) return split(idx - off_q_b, VarFamily::QB, 0);
  if (idx < off_eps_a) return split(idx - off_eps, VarFamily::Eps, 0);
  if (idx < off_eps_b) return split(idx - off_eps_a, VarFamily::EpsA, 0);
  if (idx < total_vars) return split(idx - off_eps_b, VarFamily::EpsB, 0);
  throw std::out_of_range("variable index out of range");
}

int VarIndexMap::encode(const Entry& e) const {
  switch (e.family) {
    case VarFamily::RhoA: return rho_a(e.i, e.k);
    case VarFamily::RhoB: return rho_b(e.i, e.k);
    case VarFamily::QA: return q_a(e.i, e.k);
    case VarFamily::QB: return q_b(e.i, e.k);
    case VarFamily::Eps: return eps(e.i, e.k);
    case VarFamily::EpsA: return eps_a(e.i, e.k);
    case VarFamily::EpsB: return eps_b(e.i, e.k);
  }
  throw std::logic_error("unknown variable family");
}

RowIndexMap build_row_map(const Scenario& s) {
  RowIndexMap r;
  r.n = s.n();
  r.K = s.K();
  r.Kc = s.Kc();
  const int nK = r.n * r.K;
  const int nKc = r.n * r.Kc;
  const int supK = (r.n - 1) * r.K;  // supply rows exist between section pairs

  r.off_cons_a = 0;
  r.off_cons_b = r.off_cons_a + nK;
  r.n_eq = r.off_cons_b + nK;

  r.off_vf_a = 0;
  r.off_cap_a = r.off_vf_a + nK;
  r.off_sup_a = r.off_cap_a + nK;
  r.off_supcap_a = r.off_sup_a + supK;
  r.off_vf_b = r.off_supcap_a + supK;
  r.off_cap_b = r.off_vf_b + nK;
  r.off_sup_b = r.off_cap_b + nK;
  r.off_supcap_b = r.off_sup_b + supK;
  r.off_link_now_a = r.off_supcap_b + supK;
  r.off_link_prev_a = r.off_link_now_a + nKc;
  r.off_link_now_b = r.off_link_prev_a + nKc;
  r.off_link_prev_b = r.off_link_now_b + nKc;
  r.off_jam_a = r.off_link_prev_b + nKc;
  r.off_jam_b = r.off_jam_a + nK;
  r.n_ineq = r.off_jam_b + nK;
  return r;
}

void build_objective(const Scenario& s, const ProjectedDemands& projected, QpProblem& qp) {
  const VarIndexMap& m = qp.index_map;
  const int n = m.n, K = m.K, Kc = m.Kc;
  const double T = s.control.t_step_h();
  const double w1 = s.control.w1, w2 = s.control.w2, w3 = s.control.w3, w4 = s.control.w4;

  qp.c = Eigen::VectorXd::Zero(m.total_vars);
  qp.objective_constant = 0.0;

  // TTS: T * sum_k sum_i L_i (rho^a + rho^b), k = 1..K.
  for (int k = 1; k <= K; ++k) {
    for (int i = 1; i <= n; ++i) {
      double tl = T * s.highway.lengths[i - 1];
      qp.c(m.rho_a(i, k)) += tl;
      qp.c(m.rho_b(i, k)) += tl;
    }
  }

  // Applied-sharing reward: -w1 * sum (eps^a + eps^b).
  for (int kc = 0; kc < Kc; ++kc) {
    for (int i = 1; i <= n; ++i) {
      qp.c(m.eps_a(i, kc)) -= w1;
      qp.c(m.eps_b(i, kc)) -= w1;
    }
  }

  // Quadratic terms, accumulated as w * (u - v)^2 pairs plus the
  // capacity-reserve diagonal. Stored full-symmetric with 1/2 x'Hx scaling.
  std::vector<Eigen::Triplet<double>> trip;
  auto add_pair = [&trip](int u, int v, double w) {
    trip.emplace_back(u, u, 2.0 * w);
    trip.emplace_back(v, v, 2.0 * w);
    trip.emplace_back(u, v, -2.0 * w);
    trip.emplace_back(v, u, -2.0 * w);
  };

  if (w2 != 0.0) {
    for (int kc = 1; kc < Kc; ++kc)
      for (int i = 1; i <= n; ++i) add_pair(m.eps(i, kc), m.eps(i, kc - 1), w2);
  }
  if (w3 != 0.0) {
    for (int kc = 0; kc < Kc; ++kc)
      for (int i = 2; i <= n; ++i) add_pair(m.eps(i, kc), m.eps(i - 1, kc), w3);
  }
  if (w4 != 0.0) {
    // w4 * (eps^2/d_a + (1-eps)^2/d_b); the (1-eps)^2 expansion contributes a
    // linear term and a constant, reported via objective_constant.
    for (int kc = 0; kc < Kc; ++kc) {
      for (int i = 1; i <= n; ++i) {
        double da = projected.dcf_a(i - 1, kc);
        double db = projected.dcf_b(i - 1, kc);
        trip.emplace_back(m.eps(i, kc), m.eps(i, kc), 2.0 * w4 * (1.0 / da + 1.0 / db));
        qp.c(m.eps(i, kc)) -= 2.0 * w4 / db;
        qp.objective_constant += w4 / db;
      }
    }
  }

  qp.H.resize(m.total_vars, m.total_vars);
  qp.H.setFromTriplets(trip.begin(), trip.end());
  qp.H.makeCompressed();
}

void build_constraints(const Scenario& s, QpProblem& qp) {
  const VarIndexMap& m = qp.index_map;
  const RowIndexMap& r = qp.row_map;
  const int n = m.n, K = m.K, Kc = m.Kc;
  const FdParams& fd = s.fd;
  const double T = s.control.t_step_h();
  const double lam_d = s.control.lambda_d;
  const double lam_r = s.control.lambda_r;
  // Capacity-drop droop slope (<= 0): demand bound eps*q_cap + g*(rho - eps*rho_cr).
  const double g = lam_d * fd.q_cap / (fd.rho_cr - fd.rho_max);

  const auto& beta_a = s.highway.exit_rate_a;
  const auto& beta_b = s.highway.exit_rate_b;

  std::vector<Eigen::Triplet<double>> te;  // equalities
  qp.b_e = Eigen::VectorXd::Zero(r.n_eq);
  std::vector<Eigen::Triplet<double>> ti;  // inequalities
  qp.b_i = Eigen::VectorXd::Zero(r.n_ineq);

  // Conservation, direction a:
  // rho_i(k+1) - rho_i(k) - (T/L_i)((1-beta_i) q_{i-1}(k) - q_i(k) + r_i(k)) = 0.
  // Entry flow q_0^a and the initial state are known constants.
  for (int k = 0; k < K; ++k) {
    for (int i = 1; i <= n; ++i) {
      const int row = r.cons_a(i, k);
      const double coef = T / s.highway.lengths[i - 1];
      te.emplace_back(row, m.rho_a(i, k + 1), 1.0);
      double rhs = coef * s.demands.ramp_a[i - 1][k];
      if (k >= 1) {
        te.emplace_back(row, m.rho_a(i, k), -1.0);
      } else {
        rhs += s.rho0_a[i - 1];
      }
      te.emplace_back(row, m.q_a(i, k), coef);
      if (i >= 2) {
        te.emplace_back(row, m.q_a(i - 1, k), -coef * (1.0 - beta_a[i - 1]));
      } else {
        rhs += coef * (1.0 - beta_a[0]) * s.demands.entry_a[k];
      }
      qp.b_e(row) = rhs;
    }
  }
  // Conservation, direction b (upstream neighbour is i+1; q_{n+1}^b is the
  // entry constant).
  for (int k = 0; k < K; ++k) {
    for (int i = 1; i <= n; ++i) {
      const int row = r.cons_b(i, k);
      const double coef = T / s.highway.lengths[i - 1];
      te.emplace_back(row, m.rho_b(i, k + 1), 1.0);
      double rhs = coef * s.demands.ramp_b[i - 1][k];
      if (k >= 1) {
        te.emplace_back(row, m.rho_b(i, k), -1.0);
      } else {
        rhs += s.rho0_b[i - 1];
      }
      te.emplace_back(row, m.q_b(i, k), coef);
      if (i <= n - 1) {
        te.emplace_back(row, m.q_b(i + 1, k), -coef * (1.0 - beta_b[i - 1]));
      } else {
        rhs += coef * (1.0 - beta_b[n - 1]) * s.demands.entry_b[k];
      }
      qp.b_e(row) = rhs;
    }
  }

  // Flow caps, direction a. For k = 0 the density is a constant.
  for (int k = 0; k < K; ++k) {
    const int kc = k / s.control.steps_per_ctrl;
    for (int i = 1; i <= n; ++i) {
      // q <= v_f rho.
      {
        const int row = r.vf_a(i, k);
        ti.emplace_back(row, m.q_a(i, k), 1.0);
        if (k >= 1)
          ti.emplace_back(row, m.rho_a(i, k), -fd.v_f);
        else
          qp.b_i(row) = fd.v_f * s.rho0_a[i - 1];
      }
      // q <= eps^a q_cap + g (rho - eps^a rho_cr).
      {
        const int row = r.cap_a(i, k);
        ti.emplace_back(row, m.q_a(i, k), 1.0);
        ti.emplace_back(row, m.eps_a(i, kc), -(fd.q_cap - g * fd.rho_cr));
        if (k >= 1)
          ti.emplace_back(row, m.rho_a(i, k), -g);
        else
          qp.b_i(row) = g * s.rho0_a[i - 1];
      }
      if (i <= n - 1) {
        const double bw = 1.0 - beta_a[i];  // downstream section's exit share
        const double ramp = lam_r * s.demands.ramp_a[i][k];
        // q <= (w_s / (1-beta)) (eps^a_{i+1} rho_max - rho_{i+1}) - lam_r r_{i+1}.
        {
          const int row = r.sup_a(i, k);
          ti.emplace_back(row, m.q_a(i, k), 1.0);
          ti.emplace_back(row, m.eps_a(i + 1, kc), -fd.w_s * fd.rho_max / bw);
          double rhs = -ramp;
          if (k >= 1)
            ti.emplace_back(row, m.rho_a(i + 1, k), fd.w_s / bw);
          else
            rhs -= fd.w_s / bw * s.rho0_a[i];
          qp.b_i(row) = rhs;
        }
        // q <= eps^a_{i+1} q_cap / (1-beta) - lam_r r_{i+1}.
        {
          const int row = r.supcap_a(i, k);
          ti.emplace_back(row, m.q_a(i, k), 1.0);
          ti.emplace_back(row, m.eps_a(i + 1, kc), -fd.q_cap / bw);
          qp.b_i(row) = -ramp;
        }
      }
    }
  }

  // Flow caps, direction b (downstream neighbour is i-1).
  for (int k = 0; k < K; ++k) {
    const int kc = k / s.control.steps_per_ctrl;
    for (int i = 1; i <= n; ++i) {
      {
        const int row = r.vf_b(i, k);
        ti.emplace_back(row, m.q_b(i, k), 1.0);
        if (k >= 1)
          ti.emplace_back(row, m.rho_b(i, k), -fd.v_f);
        else
          qp.b_i(row) = fd.v_f * s.rho0_b[i - 1];
      }
      {
        const int row = r.cap_b(i, k);
        ti.emplace_back(row, m.q_b(i, k), 1.0);
        ti.emplace_back(row, m.eps_b(i, kc), -(fd.q_cap - g * fd.rho_cr));
        if (k >= 1)
          ti.emplace_back(row, m.rho_b(i, k), -g);
        else
          qp.b_i(row) = g * s.rho0_b[i - 1];
      }
      if (i >= 2) {
        const double bw = 1.0 - beta_b[i - 2];
        const double ramp = lam_r * s.demands.ramp_b[i - 2][k];
        {
          const int row = r.sup_b(i, k);
          ti.emplace_back(row, m.q_b(i, k), 1.0);
          ti.emplace_back(row, m.eps_b(i - 1, kc), -fd.w_s * fd.rho_max / bw);
          double rhs = -ramp;
          if (k >= 1)
            ti.emplace_back(row, m.rho_b(i - 1, k), fd.w_s / bw);
          else
            rhs -= fd.w_s / bw * s.rho0_b[i - 2];
          qp.b_i(row) = rhs;
        }
        {
          const int row = r.supcap_b(i, k);
          ti.emplace_back(row, m.q_b(i, k), 1.0);
          ti.emplace_back(row, m.eps_b(i - 1, kc), -fd.q_cap / bw);
          qp.b_i(row) = -ramp;
        }
      }
    }
  }

  // Applied-sharing links. eps(-1) = eps_init is a constant.
  for (int kc = 0; kc < Kc; ++kc) {
    for (int i = 1; i <= n; ++i) {
      {
        const int row = r.link_now_a(i, kc);
        ti.emplace_back(row, m.eps_a(i, kc), 1.0);
        ti.emplace_back(row, m.eps(i, kc), -1.0);
      }
      {
        const int row = r.link_prev_a(i, kc);
        ti.emplace_back(row, m.eps_a(i, kc), 1.0);
        if (kc >= 1)
          ti.emplace_back(row, m.eps(i, kc - 1), -1.0);
        else
          qp.b_i(row) = s.control.eps_init[i - 1];
      }
      {
        const int row = r.link_now_b(i, kc);
        ti.emplace_back(row, m.eps_b(i, kc), 1.0);
        ti.emplace_back(row, m.eps(i, kc), 1.0);
        qp.b_i(row) = 1.0;
      }
      {
        const int row = r.link_prev_b(i, kc);
        ti.emplace_back(row, m.eps_b(i, kc), 1.0);
        if (kc >= 1) {
          ti.emplace_back(row, m.eps(i, kc - 1), 1.0);
          qp.b_i(row) = 1.0;
        } else {
          qp.b_i(row) = 1.0 - s.control.eps_init[i - 1];
        }
      }
    }
  }

  // Jam-density rows: the density holding at instant k+1 must respect the
  // sharing factor in force at that instant (the constraint that makes a
  // narrowing boundary wait for traffic to evacuate).
  for (int k = 0; k < K; ++k) {
    const int kc1 = ctrl_index(s, k + 1);
    for (int i = 1; i <= n; ++i) {
      {
        const int row = r.jam_a(i, k);
        ti.emplace_back(row, m.rho_a(i, k + 1), 1.0);
        ti.emplace_back(row, m.eps_a(i, kc1), -fd.rho_max);
      }
      {
        const int row = r.jam_b(i, k);
        ti.emplace_back(row, m.rho_b(i, k + 1), 1.0);
        ti.emplace_back(row, m.eps_b(i, kc1), -fd.rho_max);
      }
    }
  }

  qp.A_e.resize(r.n_eq, m.total_vars);
  qp.A_e.setFromTriplets(te.begin(), te.end());
  qp.A_e.makeCompressed();
  qp.A_i.resize(r.n_ineq, m.total_vars);
  qp.A_i.setFromTriplets(ti.begin(), ti.end());
  qp.A_i.makeCompressed();

  // Bounds.
  qp.lb = Eigen::VectorXd::Zero(m.total_vars);
  qp.ub = Eigen::VectorXd::Zero(m.total_vars);
  for (int k = 1; k <= K; ++k) {
    for (int i = 1; i <= n; ++i) {
      qp.ub(m.rho_a(i, k)) = fd.rho_max;
      qp.ub(m.rho_b(i, k)) = fd.rho_max;
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int i = 1; i <= n; ++i) {
      qp.ub(m.q_a(i, k)) = fd.q_cap;
      qp.ub(m.q_b(i, k)) = fd.q_cap;
    }
  }
  for (int kc = 0; kc < Kc; ++kc) {
    for (int i = 1; i <= n; ++i) {
      qp.lb(m.eps(i, kc)) = s.control.eps_min[i - 1];
      qp.ub(m.eps(i, kc)) = s.control.eps_max[i - 1];
      qp.lb(m.eps_a(i, kc)) = 0.0;
      qp.ub(m.eps_a(i, kc)) = 1.0;
      qp.lb(m.eps_b(i, kc)) = 0.0;
      qp.ub(m.eps_b(i, kc)) = 1.0;
    }
  }
}

QpProblem build_qp(const Scenario& s, const ProjectedDemands& projected) {
  QpProblem qp;
  qp.index_map = build_index_map(s);
  qp.row_map = build_row_map(s);
  build_objective(s, projected, qp);
  build_constraints(s, qp);
  return qp;
}

double QpProblem::objective_value(const Eigen::VectorXd& x) const {
  return c.dot(x) + 0.5 * x.dot(H * x);
}

namespace {

// Steps needed for traffic moved by a section's exit flow to leave the
// stretch (mainstream end or the first downstream off-ramp). Flows that
// cannot reach an exit within the remaining horizon carry no cost signal,
// so the optimizer leaves them anywhere below their bounds; the extracted
// trajectory pins them to the bound (the value the traffic model takes).
int exit_hops_a(const Scenario& s, int i) {
  int hops = s.n() - i;  // mainstream exit
  for (int j = i + 1; j <= s.n(); ++j) {
    if (s.highway.exit_rate_a[j - 1] > 0.0) hops = std::min(hops, j - i - 1);
  }
  return hops;
}

int exit_hops_b(const Scenario& s, int i) {
  int hops = i - 1;
  for (int j = 1; j <= i - 1; ++j) {
    if (s.highway.exit_rate_b[j - 1] > 0.0) hops = std::min(hops, (i - 1) - j);
  }
  return hops;
}

// Replaces cost-indifferent terminal flows by the minimum of their model
// bounds and re-propagates the conservation recursion. Returns false (and
// leaves the trajectory untouched) if the adjusted point would violate any
// constraint.
bool tighten_terminal_flows(const Scenario& s, const ExtractedSolution& sol,
                            TrafficTrajectory& traj) {
  const int n = s.n();
  const int K = s.K();
  const FdParams& fd = s.fd;
  const double lam_d = s.control.lambda_d;
  const double lam_r = s.control.lambda_r;
  const double T = s.control.t_step_h();
  const double g = lam_d * fd.q_cap / (fd.rho_cr - fd.rho_max);

  int k_min = K;
  std::vector<int> flat_a(n + 1, K), flat_b(n + 2, K);
  for (int i = 1; i <= n; ++i) {
    flat_a[i] = K - exit_hops_a(s, i);
    flat_b[i] = K - exit_hops_b(s, i);
    k_min = std::min({k_min, flat_a[i], flat_b[i]});
  }
  if (k_min >= K) return true;

  TrafficTrajectory rep = traj;
  for (int k = k_min; k < K; ++k) {
    const int kc = k / s.control.steps_per_ctrl;
    const int kc1 = ctrl_index(s, k + 1);
    // Direction a, downstream first so the neighbour's flow is final.
    for (int i = n - 1; i >= 1; --i) {
      if (k < flat_a[i]) continue;
      double rho = rep.rho_a(i - 1, k);
      double ea = sol.eps_a_raw(i - 1, kc);
      double bound = std::min(fd.v_f * rho, ea * fd.q_cap + g * (rho - ea * fd.rho_cr));
      double bw = 1.0 - s.highway.exit_rate_a[i];
      double ramp = s.demands.ramp_a[i][k];
      double ea1 = sol.eps_a_raw(i, kc);
      double rho1 = rep.rho_a(i, k);
      bound = std::min(bound, fd.w_s * (ea1 * fd.rho_max - rho1) / bw - lam_r * ramp);
      bound = std::min(bound, ea1 * fd.q_cap / bw - lam_r * ramp);
      // Jam cap of the receiving section at the instant k+1.
      double li = s.highway.lengths[i];
      double jam = sol.eps_a_raw(i, kc1) * fd.rho_max;
      bound = std::min(bound,
                       (jam - rho1 - T / li * (ramp - rep.q_a(i + 1, k))) * li / (T * bw));
      rep.q_a(i, k) = std::max(rep.q_a(i, k), std::max(0.0, bound));
    }
    // Direction b, upstream (low index) first.
    for (int i = 2; i <= n; ++i) {
      if (k < flat_b[i]) continue;
      double rho = rep.rho_b(i - 1, k);
      double eb = sol.eps_b_raw(i - 1, kc);
      double bound = std::min(fd.v_f * rho, eb * fd.q_cap + g * (rho - eb * fd.rho_cr));
      double bw = 1.0 - s.highway.exit_rate_b[i - 2];
      double ramp = s.demands.ramp_b[i - 2][k];
      double eb1 = sol.eps_b_raw(i - 2, kc);
      double rho1 = rep.rho_b(i - 2, k);
      bound = std::min(bound, fd.w_s * (eb1 * fd.rho_max - rho1) / bw - lam_r * ramp);
      bound = std::min(bound, eb1 * fd.q_cap / bw - lam_r * ramp);
      double li = s.highway.lengths[i - 2];
      double jam = sol.eps_b_raw(i - 2, kc1) * fd.rho_max;
      bound = std::min(bound,
                       (jam - rho1 - T / li * (ramp - rep.q_b(i - 2, k))) * li / (T * bw));
      rep.q_b(i - 1, k) = std::max(rep.q_b(i - 1, k), std::max(0.0, bound));
    }
    // Re-propagate conservation with the adjusted flows.
    for (int i = 1; i <= n; ++i) {
      double coef = T / s.highway.lengths[i - 1];
      rep.rho_a(i - 1, k + 1) =
          rep.rho_a(i - 1, k) +
          coef * ((1.0 - s.highway.exit_rate_a[i - 1]) * rep.q_a(i - 1, k) -
                  rep.q_a(i, k) + s.demands.ramp_a[i - 1][k]);
      rep.rho_b(i - 1, k + 1) =
          rep.rho_b(i - 1, k) +
          coef * ((1.0 - s.highway.exit_rate_b[i - 1]) * rep.q_b(i, k) -
                  rep.q_b(i - 1, k) + s.demands.ramp_b[i - 1][k]);
    }
    for (int i = 0; i < n; ++i) {
      rep.rel_a(i, k) = rep.rho_a(i, k + 1) / (sol.eps_a_raw(i, kc1) * fd.rho_cr);
      rep.rel_b(i, k) = rep.rho_b(i, k + 1) / (sol.eps_b_raw(i, kc1) * fd.rho_cr);
    }
  }

  // Accept only if the adjusted tail stays within the model constraints.
  const double tol = 1e-7 * fd.q_cap;
  for (int k = k_min; k < K; ++k) {
    const int kc = k / s.control.steps_per_ctrl;
    const int kc1 = ctrl_index(s, k + 1);
    for (int i = 1; i <= n; ++i) {
      double qa = rep.q_a(i, k);
      double rho = rep.rho_a(i - 1, k);
      double ea = sol.eps_a_raw(i - 1, kc);
      if (qa < -tol || qa > fd.v_f * rho + tol ||
          qa > ea * fd.q_cap + g * (rho - ea * fd.rho_cr) + tol)
        return false;
      if (i < n) {
        double bw = 1.0 - s.highway.exit_rate_a[i];
        double ramp = lam_r * s.demands.ramp_a[i][k];
        if (qa > fd.w_s * (sol.eps_a_raw(i, kc) * fd.rho_max - rep.rho_a(i, k)) / bw -
                     ramp + tol)
          return false;
        if (qa > sol.eps_a_raw(i, kc) * fd.q_cap / bw - ramp + tol) return false;
      }
      if (rep.rho_a(i - 1, k + 1) < -1e-9 ||
          rep.rho_a(i - 1, k + 1) > sol.eps_a_raw(i - 1, kc1) * fd.rho_max + 1e-7)
        return false;
      double qb = rep.q_b(i - 1, k);
      double rhob = rep.rho_b(i - 1, k);
      double eb = sol.eps_b_raw(i - 1, kc);
      if (qb < -tol || qb > fd.v_f * rhob + tol ||
          qb > eb * fd.q_cap + g * (rhob - eb * fd.rho_cr) + tol)
        return false;
      if (i > 1) {
        double bw = 1.0 - s.highway.exit_rate_b[i - 2];
        double ramp = lam_r * s.demands.ramp_b[i - 2][k];
        if (qb > fd.w_s * (sol.eps_b_raw(i - 2, kc) * fd.rho_max - rep.rho_b(i - 2, k)) /
                         bw -
                     ramp + tol)
          return false;
        if (qb > sol.eps_b_raw(i - 2, kc) * fd.q_cap / bw - ramp + tol) return false;
      }
      if (rep.rho_b(i - 1, k + 1) < -1e-9 ||
          rep.rho_b(i - 1, k + 1) > sol.eps_b_raw(i - 1, kc1) * fd.rho_max + 1e-7)
        return false;
    }
  }
  traj = rep;
  return true;
}

}  // namespace

ExtractedSolution extract_solution(const Eigen::VectorXd& x, const VarIndexMap& m,
                                   const Scenario& s) {
  if (x.size() != m.total_vars)
    throw std::invalid_argument("decision vector size does not match the index map");
  const int n = m.n, K = m.K, Kc = m.Kc;

  ExtractedSolution out;
  Eigen::MatrixXd eps(n, Kc);
  out.eps_a_raw.resize(n, Kc);
  out.eps_b_raw.resize(n, Kc);
  for (int kc = 0; kc < Kc; ++kc) {
    for (int i = 1; i <= n; ++i) {
      eps(i - 1, kc) = x(m.eps(i, kc));
      out.eps_a_raw(i - 1, kc) = x(m.eps_a(i, kc));
      out.eps_b_raw(i - 1, kc) = x(m.eps_b(i, kc));
    }
  }
  // The applied factors handed to the simulator are re-derived through the
  // min-rule so that downstream consumers always see it respected.
  out.plan = SharingPlan::from_decisions(s, eps);

  TrafficTrajectory& traj = out.qp_traj;
  traj.rho_a.resize(n, K + 1);
  traj.rho_b.resize(n, K + 1);
  traj.q_a.resize(n + 1, K);
  traj.q_b.resize(n + 1, K);
  traj.rel_a.resize(n, K);
  traj.rel_b.resize(n, K);
  for (int i = 1; i <= n; ++i) {
    traj.rho_a(i - 1, 0) = s.rho0_a[i - 1];
    traj.rho_b(i - 1, 0) = s.rho0_b[i - 1];
  }
  for (int k = 1; k <= K; ++k) {
    for (int i = 1; i <= n; ++i) {
      traj.rho_a(i - 1, k) = x(m.rho_a(i, k));
      traj.rho_b(i - 1, k) = x(m.rho_b(i, k));
    }
  }
  for (int k = 0; k < K; ++k) {
    traj.q_a(0, k) = s.demands.entry_a[k];
    traj.q_b(n, k) = s.demands.entry_b[k];
    for (int i = 1; i <= n; ++i) {
      traj.q_a(i, k) = x(m.q_a(i, k));
      traj.q_b(i - 1, k) = x(m.q_b(i, k));
    }
    const int kc1 = ctrl_index(s, k + 1);
    for (int i = 0; i < n; ++i) {
      traj.rel_a(i, k) = traj.rho_a(i, k + 1) / (out.eps_a_raw(i, kc1) * s.fd.rho_cr);
      traj.rel_b(i, k) = traj.rho_b(i, k + 1) / (out.eps_b_raw(i, kc1) * s.fd.rho_cr);
    }
  }
  tighten_terminal_flows(s, out, traj);
  traj.tts = tts(traj, s);
  out.qp_tts = traj.tts;
  return out;
}

double evaluate_objective(const Scenario& s, const ProjectedDemands& projected,
                          const SharingPlan& plan, const TrafficTrajectory& traj) {
  const int n = s.n(), Kc = s.Kc();
  const ControlConfig& c = s.control;

  double j = tts(traj, s);
  for (int kc = 0; kc < Kc; ++kc)
    for (int i = 0; i < n; ++i) j -= c.w1 * (plan.eps_a(i, kc) + plan.eps_b(i, kc));
  for (int kc = 1; kc < Kc; ++kc)
    for (int i = 0; i < n; ++i) {
      double d = plan.eps(i, kc) - plan.eps(i, kc - 1);
      j += c.w2 * d * d;
    }
  for (int kc = 0; kc < Kc; ++kc)
    for (int i = 1; i < n; ++i) {
      double d = plan.eps(i, kc) - plan.eps(i - 1, kc);
      j += c.w3 * d * d;
    }
  for (int kc = 0; kc < Kc; ++kc)
    for (int i = 0; i < n; ++i) {
      double e = plan.eps(i, kc);
      j += c.w4 * (e * e / projected.dcf_a(i, kc) +
                   (1.0 - e) * (1.0 - e) / projected.dcf_b(i, kc));
    }
  return j;
}

Eigen::VectorXd pack_point(const SharingPlan& plan, const TrafficTrajectory& traj,
                           const VarIndexMap& m) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m.total_vars);
  for (int k = 1; k <= m.K; ++k) {
    for (int i = 1; i <= m.n; ++i) {
      x(m.rho_a(i, k)) = traj.rho_a(i - 1, k);
      x(m.rho_b(i, k)) = traj.rho_b(i - 1, k);
    }
  }
  for (int k = 0; k < m.K; ++k) {
    for (int i = 1; i <= m.n; ++i) {
      x(m.q_a(i, k)) = traj.q_a(i, k);
      x(m.q_b(i, k)) = traj.q_b(i - 1, k);
    }
  }
  for (int kc = 0; kc < m.Kc; ++kc) {
    for (int i = 1; i <= m.n; ++i) {
      x(m.eps(i, kc)) = plan.eps(i - 1, kc);
      x(m.eps_a(i, kc)) = plan.eps_a(i - 1, kc);
      x(m.eps_b(i, kc)) = plan.eps_b(i - 1, kc);
    }
  }
  return x;
}

namespace {

void dump_sparse(const Eigen::SparseMatrix<double>& a, const char* name, std::ostream& os) {
  os << name << " " << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
  for (int outer = 0; outer < a.outerSize(); ++outer) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, outer); it; ++it) {
      os << it.row() << " " << it.col() << " " << format_double(it.value()) << "\n";
    }
  }
}

void dump_vector(const Eigen::VectorXd& v, const char* name, std::ostream& os) {
  os << name << " " << v.size() << "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << format_double(v(i)) << "\n";
}

}  // namespace

void dump_problem(const QpProblem& qp, std::ostream& os) {
  os << "ibc-qp 1\n";
  os << "vars " << qp.index_map.total_vars << "\n";
  os << "objective_constant " << format_double(qp.objective_constant) << "\n";
  dump_sparse(qp.H, "H", os);
  dump_vector(qp.c, "c", os);
  dump_sparse(qp.A_e, "Ae", os);
  dump_vector(qp.b_e, "be", os);
  dump_sparse(qp.A_i, "Ai", os);
  dump_vector(qp.b_i, "bi", os);
  dump_vector(qp.lb, "lb", os);
  dump_vector(qp.ub, "ub", os);
}

}  // namespace ibc
