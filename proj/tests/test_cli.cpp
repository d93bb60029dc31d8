// Copyright 2026 The spde-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Black-box test of the command-line binary: spawns the real executable
// (argv[1]) and checks exit codes, stdout/stderr, and written artifacts.
// Deliberately not a doctest binary; it drives a child process the way a
// shell user would and reports one failure count as its exit status.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;
int g_checks = 0;

void check(bool ok, const std::string& what) {
  ++g_checks;
  if (!ok) {
    ++g_failures;
    std::fprintf(stderr, "FAILED: %s\n", what.c_str());
  }
}

void check_contains(const std::string& haystack, const std::string& needle,
                    const std::string& what) {
  check(haystack.find(needle) != std::string::npos,
        what + " (expected to contain \"" + needle + "\", got: " +
            haystack.substr(0, 400) + ")");
}

fs::path g_work;
std::string g_binary;
int g_run_counter = 0;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

/// Runs `<prefix> <binary> <args>` under /bin/sh with captured streams.
RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const int id = g_run_counter++;
  const fs::path out_file = g_work / ("stdout_" + std::to_string(id));
  const fs::path err_file = g_work / ("stderr_" + std::to_string(id));
  std::string cmd;
  if (!env_prefix.empty()) cmd += env_prefix + " ";
  cmd += "\"" + g_binary + "\" " + args;
  cmd += " > \"" + out_file.string() + "\" 2> \"" + err_file.string() + "\"";

  RunResult result;
  const int rc = std::system(cmd.c_str());
  result.exit_code = (rc != -1 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : -1;
  result.out = read_file(out_file);
  result.err = read_file(err_file);
  return result;
}

fs::path write_config(const std::string& name, const std::string& json) {
  const fs::path path = g_work / name;
  write_file(path, json);
  return path;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

nlohmann::json load_summary(const fs::path& out_dir) {
  const std::string text = read_file(out_dir / "summary.json");
  check(!text.empty(), "summary.json exists in " + out_dir.string());
  nlohmann::json parsed =
      nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    check(false, "summary.json parses in " + out_dir.string());
    return nlohmann::json::object();
  }
  return parsed;
}

nlohmann::json summary_config(const fs::path& out_dir) {
  return load_summary(out_dir).value("config", nlohmann::json::object());
}

void test_help_and_version() {
  const RunResult help = run_cli("--help");
  check(help.exit_code == 0, "--help exits 0");
  check_contains(help.out, "simulate", "--help lists the simulate command");
  check_contains(help.out, "compare-laws",
                 "--help lists the compare-laws command");

  const RunResult version = run_cli("--version");
  check(version.exit_code == 0, "--version exits 0");
  check_contains(version.out, ".", "--version prints a dotted version");
}

void test_argument_errors() {
  const RunResult none = run_cli("");
  check(none.exit_code == 2, "missing subcommand exits 2, got " +
                                 std::to_string(none.exit_code));

  const RunResult bogus = run_cli("frobnicate");
  check(bogus.exit_code == 2, "unknown subcommand exits 2, got " +
                                  std::to_string(bogus.exit_code));
}

void test_config_file_errors() {
  const RunResult missing =
      run_cli("simulate --config " + quoted(g_work / "does_not_exist.json"));
  check(missing.exit_code == 4, "missing config file exits 4, got " +
                                    std::to_string(missing.exit_code));
  check_contains(missing.err, "cannot open configuration file",
                 "missing config file is named on stderr");

  const fs::path bad_json = write_config("bad.json", "{ not json");
  const RunResult invalid = run_cli("simulate --config " + quoted(bad_json));
  check(invalid.exit_code == 2, "invalid JSON exits 2, got " +
                                    std::to_string(invalid.exit_code));

  const fs::path bad_key = write_config("bad_key.json", R"({"bogus": 1})");
  const RunResult unknown =
      run_cli("simulate --config " + quoted(bad_key));
  check(unknown.exit_code == 2, "unknown key exits 2, got " +
                                    std::to_string(unknown.exit_code));
  check_contains(unknown.err, "unknown key 'bogus'",
                 "unknown key is named on stderr");
}

void test_successful_run_and_artifacts() {
  const fs::path out_dir = g_work / "noise_out";
  const fs::path cfg = write_config("noise.json", std::string(R"({
    "grid": {"final_time": 0.05, "length": 1.0, "time_steps": 20,
             "space_cells": 4},
    "paths": 8000, "master_seed": 99,
    "out_dir": ")") + out_dir.string() + "\"}");

  const RunResult run = run_cli("noise-selftest --config " + quoted(cfg));
  check(run.exit_code == 0,
        "noise-selftest exits 0, got " + std::to_string(run.exit_code) +
            " stderr: " + run.err);
  check_contains(run.out, "rep 0:", "digest line is printed");
  check_contains(run.out, "variance_ratio=", "digest shows the ratio");
  check_contains(run.out, "pass=yes", "self-test passes at this size");
  check_contains(run.out, "summary: " + out_dir.string() + "/summary.json",
                 "summary path is printed");
  check_contains(run.out, "wall_seconds:", "wall time is printed");

  check(fs::exists(out_dir / "summary.json"), "summary.json written");
  check(fs::exists(out_dir / "plot_data.csv"), "plot_data.csv written");
  check(fs::exists(out_dir / "noise_samples_rep0.csv"),
        "sample CSV written");

  const nlohmann::json summary = load_summary(out_dir);
  check(summary.value("experiment", "") == "noise-selftest",
        "experiment echoed in summary");
  check(summary_config(out_dir).value("master_seed", 0) == 99,
        "config seed echoed in summary");
}

void test_subcommand_overrides_config_experiment() {
  const fs::path out_dir = g_work / "override_out";
  const fs::path cfg = write_config("override.json", std::string(R"({
    "experiment": "simulate",
    "grid": {"final_time": 0.05, "length": 1.0, "time_steps": 10,
             "space_cells": 4},
    "paths": 50, "master_seed": 5,
    "out_dir": ")") + out_dir.string() + "\"}");

  const RunResult run = run_cli("noise-selftest --config " + quoted(cfg));
  check(run.exit_code == 0, "override run exits 0, got " +
                                std::to_string(run.exit_code));
  const nlohmann::json summary = load_summary(out_dir);
  check(summary.value("experiment", "") == "noise-selftest",
        "subcommand beats the config file's experiment key");
}

void test_seed_precedence() {
  const fs::path out_dir = g_work / "seed_out";
  const fs::path cfg = write_config("seed.json", std::string(R"({
    "grid": {"final_time": 0.05, "length": 1.0, "time_steps": 10,
             "space_cells": 4},
    "paths": 50, "master_seed": 1,
    "out_dir": ")") + out_dir.string() + "\"}");
  const std::string base = "noise-selftest --config " + quoted(cfg);

  auto seed_after = [&](const std::string& args,
                        const std::string& env_prefix) -> int {
    const RunResult run = run_cli(args, env_prefix);
    check(run.exit_code == 0, "seed run exits 0, got " +
                                  std::to_string(run.exit_code) +
                                  " stderr: " + run.err);
    return summary_config(out_dir).value("master_seed", 0);
  };

  check(seed_after(base, "env -u SPDE_LAB_SEED") == 1,
        "config file seed applies when no override is given");
  check(seed_after(base, "SPDE_LAB_SEED=2") == 2,
        "environment seed beats the config file");
  check(seed_after(base + " --seed 3", "SPDE_LAB_SEED=2") == 3,
        "command-line seed beats the environment");

  const RunResult garbage = run_cli(base, "SPDE_LAB_SEED=abc");
  check(garbage.exit_code == 2,
        "non-numeric environment seed exits 2, got " +
            std::to_string(garbage.exit_code));
}

void test_compute_failure_exit_code() {
  const fs::path out_dir = g_work / "blow_out";
  const fs::path cfg = write_config("blow.json", std::string(R"({
    "grid": {"final_time": 0.1, "length": 1.0, "time_steps": 10,
             "space_cells": 8},
    "coefficients": {"preset": "constant", "a": 1.0, "b": 50.0, "d": 0.0,
                      "h": 0.0},
    "paths": 100, "master_seed": 7, "clamp_bound": 1.0,
    "out_dir": ")") + out_dir.string() + "\"}");

  const RunResult run = run_cli("simulate --config " + quoted(cfg));
  check(run.exit_code == 3, "blown-up ensemble exits 3, got " +
                                std::to_string(run.exit_code));
  check_contains(run.err, "too coarse", "blow-up cause is explained");
}

void test_io_failure_exit_code() {
  const fs::path cfg = write_config("io.json", R"({
    "grid": {"final_time": 0.01, "time_steps": 2, "space_cells": 2},
    "paths": 2
  })");
  const RunResult run = run_cli("noise-selftest --config " + quoted(cfg) +
                                " --out /dev/null/nested");
  check(run.exit_code == 4, "unwritable output dir exits 4, got " +
                                std::to_string(run.exit_code));
}

void test_export_paths_flag() {
  const fs::path out_dir = g_work / "export_out";
  const fs::path cfg = write_config("export.json", std::string(R"({
    "grid": {"final_time": 0.02, "length": 1.0, "time_steps": 8,
             "space_cells": 4},
    "paths": 3, "master_seed": 11,
    "out_dir": ")") + out_dir.string() + "\"}");

  const RunResult run = run_cli("simulate --config " + quoted(cfg) +
                                " --export-paths --threads 2");
  check(run.exit_code == 0, "export run exits 0, got " +
                                std::to_string(run.exit_code) +
                                " stderr: " + run.err);
  check(fs::exists(out_dir / "paths_rep0" / "path_00000.csv"),
        "per-path CSV exported");
  const nlohmann::json config_echo = summary_config(out_dir);
  check(config_echo.value("export_paths", false),
        "flag echoed into the config");
  check(config_echo.value("threads", 0) == 2,
        "thread override echoed into the config");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <path-to-spde-lab-binary>\n", argv[0]);
    return 64;
  }
  g_binary = argv[1];
  if (!fs::exists(g_binary)) {
    std::fprintf(stderr, "binary not found: %s\n", g_binary.c_str());
    return 64;
  }
  g_work = fs::temp_directory_path() / "spde_cli_tests";
  fs::remove_all(g_work);
  fs::create_directories(g_work);
  // Keep the parent environment from influencing seed-precedence cases.
  unsetenv("SPDE_LAB_SEED");

  test_help_and_version();
  test_argument_errors();
  test_config_file_errors();
  test_successful_run_and_artifacts();
  test_subcommand_overrides_config_experiment();
  test_seed_precedence();
  test_compute_failure_exit_code();
  test_io_failure_exit_code();
  test_export_paths_flag();

  std::printf("%d checks, %d failures\n", g_checks, g_failures);
  return g_failures;
}
