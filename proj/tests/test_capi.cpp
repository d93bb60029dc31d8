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

// Exercises the shared library strictly through its public C header, the
// way a foreign-language binding would.

#include <algorithm>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "spdelab.h"

namespace fs = std::filesystem;

namespace {

std::string fresh_out_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spde_capi_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("the version string is a static dotted triple") {
  const char* v = spde_version();
  REQUIRE(v != nullptr);
  const std::string version(v);
  CHECK(!version.empty());
  CHECK(std::count(version.begin(), version.end(), '.') == 2);
  // Stable storage: repeated calls hand out the same buffer.
  CHECK(spde_version() == v);
}

TEST_CASE("null arguments are rejected without crashing") {
  CHECK(spde_run_create(nullptr, nullptr) == SPDE_ERROR_CONFIG);
  int poison = 0;
  spde_run* run = reinterpret_cast<spde_run*>(&poison);
  CHECK(spde_run_create(nullptr, &run) == SPDE_ERROR_CONFIG);
  CHECK(run == nullptr);  // out-parameter is cleared on failure
  CHECK(spde_run_create("{}", nullptr) == SPDE_ERROR_CONFIG);
  CHECK(spde_run_execute(nullptr) == SPDE_ERROR_CONFIG);
  CHECK(spde_run_summary_json(nullptr) == nullptr);
  CHECK(spde_run_config_json(nullptr) == nullptr);
  CHECK(spde_plot_data_from_summary(nullptr, nullptr) == SPDE_ERROR_CONFIG);
  char* out = nullptr;
  CHECK(spde_plot_data_from_summary(nullptr, &out) == SPDE_ERROR_CONFIG);
  CHECK(out == nullptr);
  spde_run_destroy(nullptr);
  spde_string_free(nullptr);
}

TEST_CASE("configuration failures set a readable thread-local message") {
  spde_run* run = nullptr;
  CHECK(spde_run_create(R"({"bogus": 1})", &run) == SPDE_ERROR_CONFIG);
  CHECK(run == nullptr);
  const std::string message(spde_last_error());
  CHECK(message.find("unknown key") != std::string::npos);
  CHECK(message.find("bogus") != std::string::npos);

  CHECK(spde_run_create("not json", &run) == SPDE_ERROR_CONFIG);
  CHECK(std::string(spde_last_error()).find("not valid JSON") !=
        std::string::npos);

  // Coefficient constraints are checked at create time, not execute time.
  CHECK(spde_run_create(
            R"({"coefficients": {"preset": "allen_cahn", "gamma": 0.3}})",
            &run) == SPDE_ERROR_CONFIG);
  CHECK(run == nullptr);
}

TEST_CASE("a fresh handle exposes its normalized config but no summary") {
  spde_run* run = nullptr;
  REQUIRE(spde_run_create(R"({"paths": 123})", &run) == SPDE_OK);
  REQUIRE(run != nullptr);
  CHECK(spde_run_summary_json(run) == nullptr);

  const char* config = spde_run_config_json(run);
  REQUIRE(config != nullptr);
  const std::string config_text(config);
  CHECK(config_text.find("\"paths\": 123") != std::string::npos);
  // Defaults are filled in.
  CHECK(config_text.find("\"experiment\": \"simulate\"") !=
        std::string::npos);
  CHECK(config_text.find("\"master_seed\": 12345") != std::string::npos);
  spde_run_destroy(run);
}

TEST_CASE("a small run executes and reports through the C surface") {
  const std::string out_dir = fresh_out_dir("noise");
  const std::string config = std::string(R"({
    "experiment": "noise-selftest",
    "grid": {"final_time": 0.1, "length": 1.0, "time_steps": 50,
             "space_cells": 8},
    "paths": 2000, "master_seed": 2026,
    "out_dir": ")") + out_dir + "\"}";

  spde_run* run = nullptr;
  REQUIRE(spde_run_create(config.c_str(), &run) == SPDE_OK);
  REQUIRE(spde_run_execute(run) == SPDE_OK);

  const char* summary = spde_run_summary_json(run);
  REQUIRE(summary != nullptr);
  const std::string summary_text(summary);
  CHECK(summary_text.find("\"schema\": \"spde-lab-summary-v1\"") !=
        std::string::npos);
  CHECK(summary_text.find("\"experiment\": \"noise-selftest\"") !=
        std::string::npos);
  CHECK(summary_text.find("\"pass\": true") != std::string::npos);
  CHECK(fs::exists(fs::path(out_dir) / "summary.json"));
  CHECK(fs::exists(fs::path(out_dir) / "plot_data.csv"));

  char* csv = nullptr;
  REQUIRE(spde_plot_data_from_summary(summary, &csv) == SPDE_OK);
  REQUIRE(csv != nullptr);
  const std::string plot(csv);
  CHECK(plot.rfind("series,replication,functional,x,y\n", 0) == 0);
  CHECK(plot.find("variance_ratio") != std::string::npos);
  spde_string_free(csv);
  spde_run_destroy(run);
}

TEST_CASE("compute failures surface as the compute status code") {
  const std::string out_dir = fresh_out_dir("blow");
  // A huge constant drift against a tiny clamp makes every path exit the
  // admissible box.
  const std::string config = std::string(R"({
    "experiment": "simulate",
    "grid": {"final_time": 0.1, "length": 1.0, "time_steps": 10,
             "space_cells": 8},
    "coefficients": {"preset": "constant", "a": 1.0, "b": 50.0, "d": 0.0,
                      "h": 0.0},
    "paths": 100, "master_seed": 7, "clamp_bound": 1.0,
    "out_dir": ")") + out_dir + "\"}";

  spde_run* run = nullptr;
  REQUIRE(spde_run_create(config.c_str(), &run) == SPDE_OK);
  CHECK(spde_run_execute(run) == SPDE_ERROR_COMPUTE);
  CHECK(std::string(spde_last_error()).find("too coarse") !=
        std::string::npos);
  CHECK(spde_run_summary_json(run) == nullptr);
  spde_run_destroy(run);
}

TEST_CASE("filesystem failures surface as the io status code") {
  spde_run* run = nullptr;
  const std::string config = R"({
    "experiment": "noise-selftest",
    "grid": {"final_time": 0.01, "time_steps": 2, "space_cells": 2},
    "paths": 2,
    "out_dir": "/dev/null/nested"
  })";
  REQUIRE(spde_run_create(config.c_str(), &run) == SPDE_OK);
  CHECK(spde_run_execute(run) == SPDE_ERROR_IO);
  CHECK(spde_last_error()[0] != '\0');
  spde_run_destroy(run);
}

TEST_CASE("plot extraction rejects garbage through the C surface") {
  char* out = nullptr;
  CHECK(spde_plot_data_from_summary("not json", &out) == SPDE_ERROR_CONFIG);
  CHECK(out == nullptr);
  CHECK(spde_plot_data_from_summary(R"({"schema": "x"})", &out) ==
        SPDE_ERROR_CONFIG);
  CHECK(out == nullptr);
  CHECK(std::string(spde_last_error()).find("not a recognized summary") !=
        std::string::npos);
}
