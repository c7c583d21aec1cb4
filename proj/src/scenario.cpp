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

#include "ibc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ibc/io.hpp"

namespace ibc {

using nlohmann::json;

FdParams make_fd(double v_f, double w_s, double q_cap) {
  if (!(v_f > 0.0)) throw ValidationError("fd.v_f", "must be > 0");
  if (!(w_s > 0.0)) throw ValidationError("fd.w_s", "must be > 0");
  if (!(q_cap > 0.0)) throw ValidationError("fd.q_cap", "must be > 0");
  FdParams fd;
  fd.v_f = v_f;
  fd.w_s = w_s;
  fd.q_cap = q_cap;
  fd.rho_cr = q_cap / v_f;
  fd.rho_max = fd.rho_cr + q_cap / w_s;
  return fd;
}

std::vector<double> expand_demand(const std::vector<DemandPoint>& points,
                                  double t_step_s, int horizon) {
  std::vector<double> out(static_cast<size_t>(horizon), 0.0);
  if (points.empty()) return out;
  for (int k = 0; k < horizon; ++k) {
    double t = k * t_step_s;
    if (t <= points.front().t_s) {
      out[k] = points.front().q;
    } else if (t >= points.back().t_s) {
      out[k] = points.back().q;
    } else {
      size_t j = 1;
      while (points[j].t_s < t) ++j;
      const DemandPoint& p0 = points[j - 1];
      const DemandPoint& p1 = points[j];
      if (p1.t_s == t) {
        out[k] = p1.q;  // exact hit, no interpolation noise
      } else {
        double f = (t - p0.t_s) / (p1.t_s - p0.t_s);
        out[k] = p0.q + f * (p1.q - p0.q);
      }
    }
  }
  return out;
}

namespace {

std::string idx_field(const std::string& base, int i) {
  return base + "[" + std::to_string(i + 1) + "]";
}

void check_len(const std::string& field, size_t got, size_t want) {
  if (got != want) {
    throw ValidationError(field, "expected " + std::to_string(want) +
                                     " entries, got " + std::to_string(got));
  }
}

}  // namespace

void validate(const Scenario& s) {
  const int n = s.highway.n;
  if (n < 1) throw ValidationError("highway.n", "must be >= 1");

  check_len("highway.lengths", s.highway.lengths.size(), n);
  check_len("highway.exit_rate_a", s.highway.exit_rate_a.size(), n);
  check_len("highway.exit_rate_b", s.highway.exit_rate_b.size(), n);
  check_len("highway.onramp_a", s.highway.has_onramp_a.size(), n);
  check_len("highway.onramp_b", s.highway.has_onramp_b.size(), n);

  for (int i = 0; i < n; ++i) {
    if (!(s.highway.lengths[i] > 0.0))
      throw ValidationError(idx_field("highway.lengths", i), "must be > 0");
    if (!(s.highway.exit_rate_a[i] >= 0.0 && s.highway.exit_rate_a[i] < 1.0))
      throw ValidationError(idx_field("highway.exit_rate_a", i), "must be in [0, 1)");
    if (!(s.highway.exit_rate_b[i] >= 0.0 && s.highway.exit_rate_b[i] < 1.0))
      throw ValidationError(idx_field("highway.exit_rate_b", i), "must be in [0, 1)");
  }

  // FD closure must hold on the derived fields.
  if (!(s.fd.v_f > 0.0)) throw ValidationError("fd.v_f", "must be > 0");
  if (!(s.fd.w_s > 0.0)) throw ValidationError("fd.w_s", "must be > 0");
  if (!(s.fd.q_cap > 0.0)) throw ValidationError("fd.q_cap", "must be > 0");
  if (std::abs(s.fd.rho_cr * s.fd.v_f - s.fd.q_cap) > 1e-9 * s.fd.q_cap)
    throw ValidationError("fd.rho_cr", "violates q_cap = v_f * rho_cr");
  if (std::abs((s.fd.rho_max - s.fd.rho_cr) * s.fd.w_s - s.fd.q_cap) > 1e-9 * s.fd.q_cap)
    throw ValidationError("fd.rho_max", "violates q_cap = w_s * (rho_max - rho_cr)");
  if (!(s.fd.rho_cr < s.fd.rho_max))
    throw ValidationError("fd.rho_max", "must exceed rho_cr");

  const ControlConfig& c = s.control;
  if (!(c.t_step_s > 0.0)) throw ValidationError("control.T", "must be > 0");
  if (!(c.t_ctrl_s > 0.0)) throw ValidationError("control.T_c", "must be > 0");
  double ratio = c.t_ctrl_s / c.t_step_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0)
    throw ValidationError("control.T_c", "must be a positive integer multiple of T");
  if (c.steps_per_ctrl != static_cast<int>(std::round(ratio)))
    throw ValidationError("control.T_c", "inconsistent steps-per-control-step value");
  if (c.horizon < 1) throw ValidationError("control.K", "must be >= 1");
  if (c.horizon % c.steps_per_ctrl != 0)
    throw ValidationError("control.K", "K*T must be an exact multiple of T_c");
  if (c.ctrl_horizon != c.horizon / c.steps_per_ctrl)
    throw ValidationError("control.K_c", "must equal K*T/T_c");

  check_len("control.eps_min", c.eps_min.size(), n);
  check_len("control.eps_max", c.eps_max.size(), n);
  check_len("control.eps_init", c.eps_init.size(), n);
  for (int i = 0; i < n; ++i) {
    if (!(c.eps_min[i] > 0.0))
      throw ValidationError(idx_field("control.eps_min", i), "must be > 0");
    if (!(c.eps_max[i] < 1.0))
      throw ValidationError(idx_field("control.eps_max", i), "must be < 1");
    if (!(c.eps_min[i] <= c.eps_max[i]))
      throw ValidationError(idx_field("control.eps_min", i),
                            "must not exceed eps_max");
    if (!(c.eps_init[i] > 0.0 && c.eps_init[i] < 1.0))
      throw ValidationError(idx_field("control.eps_init", i), "must be in (0, 1)");
  }
  if (!(c.lambda_d >= 0.0 && c.lambda_d <= 1.0))
    throw ValidationError("control.lambda_d", "must be in [0, 1]");
  if (!(c.lambda_r >= 0.0 && c.lambda_r <= 1.0))
    throw ValidationError("control.lambda_r", "must be in [0, 1]");
  if (c.w1 < 0.0) throw ValidationError("control.w1", "must be >= 0");
  if (c.w2 < 0.0) throw ValidationError("control.w2", "must be >= 0");
  if (c.w3 < 0.0) throw ValidationError("control.w3", "must be >= 0");
  if (c.w4 < 0.0) throw ValidationError("control.w4", "must be >= 0");
  if (!(c.d_floor > 0.0)) throw ValidationError("control.d_floor", "must be > 0");

  const int K = c.horizon;
  check_len("demands.entry_a", s.demands.entry_a.size(), K);
  check_len("demands.entry_b", s.demands.entry_b.size(), K);
  check_len("demands.ramp_a", s.demands.ramp_a.size(), n);
  check_len("demands.ramp_b", s.demands.ramp_b.size(), n);
  for (int k = 0; k < K; ++k) {
    if (s.demands.entry_a[k] < 0.0)
      throw ValidationError("demands.entry_a", "negative flow at step " + std::to_string(k));
    if (s.demands.entry_b[k] < 0.0)
      throw ValidationError("demands.entry_b", "negative flow at step " + std::to_string(k));
  }
  for (int i = 0; i < n; ++i) {
    check_len(idx_field("demands.ramp_a", i), s.demands.ramp_a[i].size(), K);
    check_len(idx_field("demands.ramp_b", i), s.demands.ramp_b[i].size(), K);
    for (int k = 0; k < K; ++k) {
      double ra = s.demands.ramp_a[i][k];
      double rb = s.demands.ramp_b[i][k];
      if (ra < 0.0)
        throw ValidationError(idx_field("demands.ramp_a", i), "negative flow");
      if (rb < 0.0)
        throw ValidationError(idx_field("demands.ramp_b", i), "negative flow");
      if (!s.highway.has_onramp_a[i] && ra != 0.0)
        throw ValidationError(idx_field("demands.ramp_a", i),
                              "nonzero flow at a section without an on-ramp");
      if (!s.highway.has_onramp_b[i] && rb != 0.0)
        throw ValidationError(idx_field("demands.ramp_b", i),
                              "nonzero flow at a section without an on-ramp");
    }
  }

  check_len("initial.rho_a", s.rho0_a.size(), n);
  check_len("initial.rho_b", s.rho0_b.size(), n);
  for (int i = 0; i < n; ++i) {
    if (s.rho0_a[i] < 0.0)
      throw ValidationError(idx_field("initial.rho_a", i), "must be >= 0");
    if (s.rho0_b[i] < 0.0)
      throw ValidationError(idx_field("initial.rho_b", i), "must be >= 0");
    if (s.rho0_a[i] > c.eps_init[i] * s.fd.rho_max + 1e-12)
      throw ValidationError(idx_field("initial.rho_a", i),
                            "exceeds the initial jam density eps_init*rho_max");
    if (s.rho0_b[i] > (1.0 - c.eps_init[i]) * s.fd.rho_max + 1e-12)
      throw ValidationError(idx_field("initial.rho_b", i),
                            "exceeds the initial jam density (1-eps_init)*rho_max");
  }
}

namespace {

std::vector<DemandPoint> parse_breakpoints(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError(field + ": expected a breakpoint array");
  std::vector<DemandPoint> out;
  out.reserve(j.size());
  double prev_t = -1.0;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("t_s") || !e.contains("q"))
      throw ParseError(field + ": breakpoints must be {t_s, q} objects");
    DemandPoint p{e.at("t_s").get<double>(), e.at("q").get<double>()};
    if (p.t_s < 0.0) throw ValidationError(field, "breakpoint time must be >= 0");
    if (p.t_s <= prev_t) throw ValidationError(field, "breakpoint times must be increasing");
    if (p.q < 0.0) throw ValidationError(field, "breakpoint flow must be >= 0");
    prev_t = p.t_s;
    out.push_back(p);
  }
  if (out.empty()) throw ValidationError(field, "needs at least one breakpoint");
  return out;
}

// Scalar-or-array per-section field.
std::vector<double> per_section(const json& j, int n, const std::string& field) {
  std::vector<double> out;
  if (j.is_number()) {
    out.assign(static_cast<size_t>(n), j.get<double>());
  } else if (j.is_array()) {
    out = j.get<std::vector<double>>();
    check_len(field, out.size(), n);
  } else {
    throw ParseError(field + ": expected a number or an array");
  }
  return out;
}

const json& require(const json& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError("missing required entry " + ctx + key);
  return *it;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config root must be an object");

  Scenario s;
  s.label = j.value("label", std::string{});

  try {
    const json& fd = require(j, "fd", "");
    s.fd = make_fd(require(fd, "v_f", "fd.").get<double>(),
                   require(fd, "w_s", "fd.").get<double>(),
                   require(fd, "q_cap", "fd.").get<double>());

    const json& hw = require(j, "highway", "");
    s.highway.n = require(hw, "n", "highway.").get<int>();
    if (s.highway.n < 1) throw ValidationError("highway.n", "must be >= 1");
    const int n = s.highway.n;
    s.highway.lengths = per_section(require(hw, "lengths", "highway."), n, "highway.lengths");
    s.highway.exit_rate_a =
        hw.contains("exit_rate_a") ? per_section(hw.at("exit_rate_a"), n, "highway.exit_rate_a")
                                   : std::vector<double>(n, 0.0);
    s.highway.exit_rate_b =
        hw.contains("exit_rate_b") ? per_section(hw.at("exit_rate_b"), n, "highway.exit_rate_b")
                                   : std::vector<double>(n, 0.0);
    s.highway.has_onramp_a.assign(n, false);
    s.highway.has_onramp_b.assign(n, false);
    if (hw.contains("width_m")) s.highway.width_m = hw.at("width_m").get<double>();

    const json& ctl = require(j, "control", "");
    ControlConfig& c = s.control;
    c.t_step_s = require(ctl, "T_s", "control.").get<double>();
    c.t_ctrl_s = require(ctl, "Tc_s", "control.").get<double>();
    c.horizon = require(ctl, "K", "control.").get<int>();
    if (!(c.t_step_s > 0.0)) throw ValidationError("control.T", "must be > 0");
    double ratio = c.t_ctrl_s / c.t_step_s;
    if (!(c.t_ctrl_s > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 ||
        std::round(ratio) < 1.0)
      throw ValidationError("control.T_c", "must be a positive integer multiple of T");
    c.steps_per_ctrl = static_cast<int>(std::round(ratio));
    if (c.horizon < 1 || c.horizon % c.steps_per_ctrl != 0)
      throw ValidationError("control.K", "K*T must be an exact multiple of T_c");
    c.ctrl_horizon = c.horizon / c.steps_per_ctrl;
    c.eps_min = per_section(require(ctl, "eps_min", "control."), n, "control.eps_min");
    c.eps_max = per_section(require(ctl, "eps_max", "control."), n, "control.eps_max");
    c.eps_init = ctl.contains("eps_init")
                     ? per_section(ctl.at("eps_init"), n, "control.eps_init")
                     : std::vector<double>(n, 0.5);
    c.lambda_d = ctl.value("lambda_d", 0.0);
    c.lambda_r = ctl.value("lambda_r", 1.0);
    c.w1 = ctl.value("w1", 0.0);
    c.w2 = ctl.value("w2", 0.0);
    c.w3 = ctl.value("w3", 0.0);
    c.w4 = ctl.value("w4", 0.0);
    c.d_floor = ctl.value("d_floor", 10.0);

    const json& dem = require(j, "demands", "");
    const int K = c.horizon;
    s.demands.entry_a = expand_demand(
        parse_breakpoints(require(dem, "entry_a", "demands."), "demands.entry_a"),
        c.t_step_s, K);
    s.demands.entry_b = expand_demand(
        parse_breakpoints(require(dem, "entry_b", "demands."), "demands.entry_b"),
        c.t_step_s, K);
    s.demands.ramp_a.assign(n, std::vector<double>(K, 0.0));
    s.demands.ramp_b.assign(n, std::vector<double>(K, 0.0));
    for (const char* key : {"ramp_a", "ramp_b"}) {
      if (!dem.contains(key)) continue;
      const json& ramps = dem.at(key);
      if (!ramps.is_object())
        throw ParseError(std::string("demands.") + key + ": expected a section->breakpoints map");
      for (auto it = ramps.begin(); it != ramps.end(); ++it) {
        int section = 0;
        try {
          section = std::stoi(it.key());
        } catch (...) {
          throw ParseError(std::string("demands.") + key + ": section keys must be integers");
        }
        std::string field = std::string("demands.") + key + "[" + it.key() + "]";
        if (section < 1 || section > n)
          throw ValidationError(field, "section out of range");
        auto series = expand_demand(parse_breakpoints(it.value(), field), c.t_step_s, K);
        if (std::string(key) == "ramp_a") {
          s.demands.ramp_a[section - 1] = std::move(series);
          s.highway.has_onramp_a[section - 1] = true;
        } else {
          s.demands.ramp_b[section - 1] = std::move(series);
          s.highway.has_onramp_b[section - 1] = true;
        }
      }
    }

    const json& init = require(j, "initial", "");
    s.rho0_a = per_section(require(init, "rho_a", "initial."), n, "initial.rho_a");
    s.rho0_b = per_section(require(init, "rho_b", "initial."), n, "initial.rho_b");
  } catch (const json::exception& e) {
    throw ParseError(std::string("config type error: ") + e.what());
  }

  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path_or_name) {
  for (const char* name : {"uncongested", "congested"}) {
    if (path_or_name == name) return builtin_scenario(name);
  }
  std::ifstream in(path_or_name);
  if (!in) throw ParseError("cannot open scenario file: " + path_or_name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string emit_scenario(const Scenario& s) {
  json j;
  j["label"] = s.label;
  j["fd"] = {{"v_f", s.fd.v_f}, {"w_s", s.fd.w_s}, {"q_cap", s.fd.q_cap}};

  json hw;
  hw["n"] = s.highway.n;
  hw["lengths"] = s.highway.lengths;
  hw["exit_rate_a"] = s.highway.exit_rate_a;
  hw["exit_rate_b"] = s.highway.exit_rate_b;
  if (s.highway.width_m) hw["width_m"] = *s.highway.width_m;
  j["highway"] = hw;

  const ControlConfig& c = s.control;
  j["control"] = {{"T_s", c.t_step_s},   {"Tc_s", c.t_ctrl_s},  {"K", c.horizon},
                  {"eps_min", c.eps_min}, {"eps_max", c.eps_max}, {"eps_init", c.eps_init},
                  {"lambda_d", c.lambda_d}, {"lambda_r", c.lambda_r},
                  {"w1", c.w1}, {"w2", c.w2}, {"w3", c.w3}, {"w4", c.w4},
                  {"d_floor", c.d_floor}};

  // Per-step series are emitted as breakpoints at the step times; linear
  // interpolation through them reproduces the series exactly.
  auto steps_to_breakpoints = [&](const std::vector<double>& series) {
    json arr = json::array();
    for (size_t k = 0; k < series.size(); ++k) {
      arr.push_back({{"t_s", k * c.t_step_s}, {"q", series[k]}});
    }
    return arr;
  };

  json dem;
  dem["entry_a"] = steps_to_breakpoints(s.demands.entry_a);
  dem["entry_b"] = steps_to_breakpoints(s.demands.entry_b);
  json ra = json::object(), rb = json::object();
  for (int i = 0; i < s.highway.n; ++i) {
    if (s.highway.has_onramp_a[i]) ra[std::to_string(i + 1)] = steps_to_breakpoints(s.demands.ramp_a[i]);
    if (s.highway.has_onramp_b[i]) rb[std::to_string(i + 1)] = steps_to_breakpoints(s.demands.ramp_b[i]);
  }
  if (!ra.empty()) dem["ramp_a"] = ra;
  if (!rb.empty()) dem["ramp_b"] = rb;
  j["demands"] = dem;

  j["initial"] = {{"rho_a", s.rho0_a}, {"rho_b", s.rho0_b}};
  return j.dump(2) + "\n";
}

}  // namespace ibc
