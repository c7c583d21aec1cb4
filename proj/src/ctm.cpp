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

#include "ibc/ctm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ibc {

SharingPlan SharingPlan::constant(const Scenario& s, double eps_value) {
  Eigen::MatrixXd eps = Eigen::MatrixXd::Constant(s.n(), s.Kc(), eps_value);
  return from_decisions(s, eps);
}

SharingPlan SharingPlan::from_decisions(const Scenario& s, const Eigen::MatrixXd& eps) {
  const int n = s.n();
  const int Kc = s.Kc();
  if (eps.rows() != n || eps.cols() != Kc)
    throw std::invalid_argument("sharing plan dimensions do not match the scenario");

  SharingPlan plan;
  plan.eps = eps;
  for (int i = 0; i < n; ++i) {
    for (int kc = 0; kc < Kc; ++kc) {
      double lo = s.control.eps_min[i];
      double hi = s.control.eps_max[i];
      double v = plan.eps(i, kc);
      if (v < lo - 1e-6 || v > hi + 1e-6)
        throw std::invalid_argument("sharing factor outside bounds at section " +
                                    std::to_string(i + 1) + ", k_c " + std::to_string(kc));
      plan.eps(i, kc) = std::clamp(v, lo, hi);
    }
  }

  plan.eps_a.resize(n, Kc);
  plan.eps_b.resize(n, Kc);
  Eigen::VectorXd prev = Eigen::Map<const Eigen::VectorXd>(s.control.eps_init.data(), n);
  for (int kc = 0; kc < Kc; ++kc) {
    auto [ea, eb] = applied_sharing(plan.eps.col(kc), prev);
    plan.eps_a.col(kc) = ea;
    plan.eps_b.col(kc) = eb;
    prev = plan.eps.col(kc);
  }
  return plan;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> applied_sharing(
    const Eigen::VectorXd& eps_now, const Eigen::VectorXd& eps_prev) {
  Eigen::VectorXd ea = eps_now.cwiseMin(eps_prev);
  Eigen::VectorXd eb =
      (Eigen::VectorXd::Ones(eps_now.size()) - eps_now)
          .cwiseMin(Eigen::VectorXd::Ones(eps_prev.size()) - eps_prev);
  return {ea, eb};
}

double demand_fn(double rho, double eps_dir, const FdParams& fd, double lambda_d) {
  double droop = eps_dir * fd.q_cap +
                 lambda_d * fd.q_cap * (rho - eps_dir * fd.rho_cr) / (fd.rho_cr - fd.rho_max);
  return std::max(0.0, std::min(droop, fd.v_f * rho));
}

double supply_fn(double rho, double eps_dir, const FdParams& fd) {
  return std::max(0.0, std::min(eps_dir * fd.q_cap, fd.w_s * (eps_dir * fd.rho_max - rho)));
}

StepFlows step(Eigen::VectorXd& rho_a, Eigen::VectorXd& rho_b,
               const Eigen::VectorXd& eps_a, const Eigen::VectorXd& eps_b,
               const StepExternals& ext, const Scenario& s) {
  const int n = s.n();
  if (rho_a.size() != n || rho_b.size() != n)
    throw std::invalid_argument("state dimension mismatch");
  const FdParams& fd = s.fd;
  const double lambda_d = s.control.lambda_d;
  const double lambda_r = s.control.lambda_r;
  const double T = s.control.t_step_h();

  StepFlows flows;
  flows.q_a.resize(n + 1);
  flows.q_b.resize(n + 1);

  // Direction a: q_a[i] = q_i^a for i = 0..n; traffic moves towards higher i.
  for (int i = 1; i <= n; ++i) {
    double d = demand_fn(rho_a(i - 1), eps_a(i - 1), fd, lambda_d);
    if (i < n) {
      double sup = supply_fn(rho_a(i), eps_a(i), fd) / (1.0 - s.highway.exit_rate_a[i]) -
                   lambda_r * ext.ramp_a(i);
      d = std::min(d, sup);
    }
    flows.q_a(i) = std::max(0.0, d);
  }
  // Direction b: q_b[i-1] = q_i^b for i = 1..n+1; traffic moves towards lower i.
  for (int i = n; i >= 1; --i) {
    double d = demand_fn(rho_b(i - 1), eps_b(i - 1), fd, lambda_d);
    if (i > 1) {
      double sup = supply_fn(rho_b(i - 2), eps_b(i - 2), fd) /
                       (1.0 - s.highway.exit_rate_b[i - 2]) -
                   lambda_r * ext.ramp_b(i - 2);
      d = std::min(d, sup);
    }
    flows.q_b(i - 1) = std::max(0.0, d);
  }

  // Entries admit the demanded inflow in full; the clamp kicks in only when
  // the receiving section would otherwise be pushed past its jam density
  // (evaluated with the factors in force during this step).
  {
    double beta1 = s.highway.exit_rate_a[0];
    double room = (eps_a(0) * fd.rho_max - rho_a(0)) * s.highway.lengths[0] / T -
                  ext.ramp_a(0) + flows.q_a(1);
    flows.q_a(0) = std::min(ext.entry_a, std::max(0.0, room / (1.0 - beta1)));
  }
  {
    double betan = s.highway.exit_rate_b[n - 1];
    double room = (eps_b(n - 1) * fd.rho_max - rho_b(n - 1)) * s.highway.lengths[n - 1] / T -
                  ext.ramp_b(n - 1) + flows.q_b(n - 1);
    flows.q_b(n) = std::min(ext.entry_b, std::max(0.0, room / (1.0 - betan)));
  }

  // Conservation update.
  for (int i = 0; i < n; ++i) {
    double coef = T / s.highway.lengths[i];
    rho_a(i) += coef * ((1.0 - s.highway.exit_rate_a[i]) * flows.q_a(i) - flows.q_a(i + 1) +
                        ext.ramp_a(i));
    rho_b(i) += coef * ((1.0 - s.highway.exit_rate_b[i]) * flows.q_b(i + 1) - flows.q_b(i) +
                        ext.ramp_b(i));
  }
  return flows;
}

TrafficTrajectory simulate(const Scenario& s, const SharingPlan& plan) {
  const int n = s.n();
  const int K = s.K();
  if (plan.eps.rows() != n || plan.eps.cols() != s.Kc())
    throw std::invalid_argument("plan dimensions do not match the scenario");

  TrafficTrajectory traj;
  traj.rho_a.resize(n, K + 1);
  traj.rho_b.resize(n, K + 1);
  traj.q_a.resize(n + 1, K);
  traj.q_b.resize(n + 1, K);
  traj.rel_a.resize(n, K);
  traj.rel_b.resize(n, K);

  Eigen::VectorXd rho_a = Eigen::Map<const Eigen::VectorXd>(s.rho0_a.data(), n);
  Eigen::VectorXd rho_b = Eigen::Map<const Eigen::VectorXd>(s.rho0_b.data(), n);
  traj.rho_a.col(0) = rho_a;
  traj.rho_b.col(0) = rho_b;

  const double T = s.control.t_step_h();
  double queue_a = 0.0, queue_b = 0.0;
  bool queue_warned_a = false, queue_warned_b = false;

  for (int k = 0; k < K; ++k) {
    const int kc = ctrl_index(s, k);

    StepExternals ext;
    ext.ramp_a.resize(n);
    ext.ramp_b.resize(n);
    for (int i = 0; i < n; ++i) {
      ext.ramp_a(i) = s.demands.ramp_a[i][k];
      ext.ramp_b(i) = s.demands.ramp_b[i][k];
    }
    // A nonempty origin queue drains on top of the demanded inflow.
    ext.entry_a = s.demands.entry_a[k] + queue_a / T;
    ext.entry_b = s.demands.entry_b[k] + queue_b / T;

    StepFlows flows =
        step(rho_a, rho_b, plan.eps_a.col(kc), plan.eps_b.col(kc), ext, s);

    queue_a += T * (s.demands.entry_a[k] - flows.q_a(0));
    queue_b += T * (s.demands.entry_b[k] - flows.q_b(n));
    queue_a = std::max(0.0, queue_a);
    queue_b = std::max(0.0, queue_b);
    traj.origin_queue_a_max = std::max(traj.origin_queue_a_max, queue_a);
    traj.origin_queue_b_max = std::max(traj.origin_queue_b_max, queue_b);
    if (queue_a > 1e-9 && !queue_warned_a) {
      std::ostringstream msg;
      msg << "a: entry clamped to keep the first section under jam at k=" << k
          << " (vehicles queue outside the stretch)";
      traj.warnings.push_back(msg.str());
      queue_warned_a = true;
    }
    if (queue_b > 1e-9 && !queue_warned_b) {
      std::ostringstream msg;
      msg << "b: entry clamped to keep the last section under jam at k=" << k
          << " (vehicles queue outside the stretch)";
      traj.warnings.push_back(msg.str());
      queue_warned_b = true;
    }

    traj.q_a.col(k) = flows.q_a;
    traj.q_b.col(k) = flows.q_b;
    traj.rho_a.col(k + 1) = rho_a;
    traj.rho_b.col(k + 1) = rho_b;

    // Relative densities and jam check use the factors in force at the time
    // instant k+1 (a narrowing boundary can transiently strand density above
    // its new jam density).
    const int kc1 = ctrl_index(s, k + 1);
    for (int i = 0; i < n; ++i) {
      traj.rel_a(i, k) = rho_a(i) / (plan.eps_a(i, kc1) * s.fd.rho_cr);
      traj.rel_b(i, k) = rho_b(i) / (plan.eps_b(i, kc1) * s.fd.rho_cr);
      if (rho_a(i) > plan.eps_a(i, kc1) * s.fd.rho_max + 1e-9) {
        std::ostringstream msg;
        msg << "a: section " << (i + 1) << " exceeds jam density at k=" << (k + 1);
        traj.warnings.push_back(msg.str());
      }
      if (rho_b(i) > plan.eps_b(i, kc1) * s.fd.rho_max + 1e-9) {
        std::ostringstream msg;
        msg << "b: section " << (i + 1) << " exceeds jam density at k=" << (k + 1);
        traj.warnings.push_back(msg.str());
      }
    }
  }

  traj.origin_queue_a_final = queue_a;
  traj.origin_queue_b_final = queue_b;
  traj.tts = tts(traj, s);
  return traj;
}

double tts(const TrafficTrajectory& traj, const Scenario& s) {
  const double T = s.control.t_step_h();
  double total = 0.0;
  for (int k = 1; k <= s.K(); ++k) {
    for (int i = 0; i < s.n(); ++i) {
      total += s.highway.lengths[i] * (traj.rho_a(i, k) + traj.rho_b(i, k));
    }
  }
  return T * total;
}

}  // namespace ibc
