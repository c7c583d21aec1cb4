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

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  if (const char* env = std::getenv("IBC_CLI")) return env;
  for (const char* candidate : {"tools/ibc", "./ibc", "../tools/ibc", "build/tools/ibc"}) {
    if (fs::exists(candidate)) return candidate;
  }
  return {};
}

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  RunResult r;
  std::string cmd = cli_path() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 512> buf;
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "ibc_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const std::string& name, const std::string& body) {
  fs::path p = temp_dir() / name;
  std::ofstream out(p);
  out << body;
  return p.string();
}

const char* kValidConfig = R"({
  "label": "cli-demo",
  "fd": {"v_f": 100.0, "w_s": 12.0, "q_cap": 12000.0},
  "highway": {"n": 2, "lengths": [0.5, 0.5], "exit_rate_a": [0, 0.1]},
  "control": {"T_s": 10, "Tc_s": 60, "K": 24, "eps_min": 0.16, "eps_max": 0.84,
              "lambda_d": 0.4, "lambda_r": 0.7,
              "w1": 0.1, "w2": 1e-4, "w3": 1e-5, "w4": 1e-3},
  "demands": {
    "entry_a": [{"t_s": 0, "q": 2000}, {"t_s": 120, "q": 5000}],
    "entry_b": [{"t_s": 0, "q": 1500}],
    "ramp_a": {"2": [{"t_s": 0, "q": 600}]}
  },
  "initial": {"rho_a": [10, 10], "rho_b": [8, 8]}
})";

}  // namespace

TEST_CASE("check accepts a valid config file") {
  REQUIRE(!cli_path().empty());
  std::string cfg = write_config("valid.json", kValidConfig);
  RunResult r = run("check --scenario " + cfg);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("ok:") != std::string::npos);
}

TEST_CASE("check rejects a control step that does not divide evenly") {
  std::string body = kValidConfig;
  auto pos = body.find("\"Tc_s\": 60");
  body.replace(pos, std::string("\"Tc_s\": 60").size(), "\"Tc_s\": 25");
  std::string cfg = write_config("bad_tc.json", body);
  RunResult r = run("check --scenario " + cfg);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("control.T_c") != std::string::npos);
}

TEST_CASE("check reports a parse error for a missing demand section") {
  std::string body = kValidConfig;
  auto pos = body.find("\"entry_b\"");
  auto end = body.find("],", pos);
  body.erase(pos, end - pos + 2);
  std::string cfg = write_config("missing_entry.json", body);
  RunResult r = run("check --scenario " + cfg);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("parse error") != std::string::npos);
  CHECK(r.output.find("entry_b") != std::string::npos);
}

TEST_CASE("optimize, simulate --plan and report agree on the controlled TTS") {
  fs::path base = temp_dir() / "pipeline";
  fs::remove_all(base);
  std::string cfg = write_config("pipeline.json", kValidConfig);

  RunResult opt = run("optimize --scenario " + cfg + " --out " + (base / "opt").string());
  REQUIRE(opt.exit_code == 0);
  auto grab = [&](const std::string& text, const std::string& key) {
    auto pos = text.find(key + " ");
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + key.size() + 1));
  };
  double sim_tts = grab(opt.output, "sim_tts");

  RunResult sim = run("simulate --scenario " + cfg + " --plan " +
                      (base / "opt" / "optimize_plan.csv").string() + " --out " +
                      (base / "sim").string());
  REQUIRE(sim.exit_code == 0);
  double replay_tts = grab(sim.output, "tts");
  CHECK(replay_tts == doctest::Approx(sim_tts).epsilon(1e-12));

  RunResult rep = run("report --scenario " + cfg + " --capacity-drop on --out " +
                      (base / "rep").string());
  REQUIRE(rep.exit_code == 0);
  // sim_tts is the fifth column of the report row.
  std::istringstream is(rep.output);
  std::string line;
  std::getline(is, line);  // header
  REQUIRE(std::getline(is, line));
  std::istringstream row(line);
  std::string cell;
  for (int c = 0; c < 5; ++c) std::getline(row, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(sim_tts).epsilon(1e-9));
}

TEST_CASE("simulate without a plan reports the no-control TTS") {
  std::string cfg = write_config("nocontrol.json", kValidConfig);
  fs::path out = temp_dir() / "nc";
  RunResult r = run("simulate --scenario " + cfg + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("tts ") != std::string::npos);
  CHECK(fs::exists(out / "trajectory.csv"));
  CHECK(fs::exists(out / "summary.csv"));
  CHECK(fs::exists(out / "manifest.txt"));
}

TEST_CASE("dump writes the problem interchange file") {
  std::string cfg = write_config("dump.json", kValidConfig);
  fs::path out = temp_dir() / "dump";
  RunResult r = run("dump --scenario " + cfg + " --out " + out.string());
  CHECK(r.exit_code == 0);
  std::ifstream in(out / "problem.txt");
  std::string first;
  std::getline(in, first);
  CHECK(first == "ibc-qp 1");
}
