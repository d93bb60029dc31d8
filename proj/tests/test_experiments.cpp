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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "doctest.h"
#include "errors.hpp"
#include "experiments.hpp"
#include "json.hpp"

using namespace spde;
namespace fs = std::filesystem;

namespace {

fs::path fresh_out_dir(const std::string& name) {
  const fs::path dir =
      fs::temp_directory_path() / "spde_lab_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open " << path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> nonempty_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::size_t column_index(const std::vector<std::string>& header,
                         const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  FAIL("column '" << name << "' not found");
  return 0;
}

/// Mean of one named column over rows whose blow_up column is "0".
double live_column_mean(const std::string& csv, const std::string& name) {
  const std::vector<std::string> lines = nonempty_lines(csv);
  REQUIRE(lines.size() >= 2);
  const std::vector<std::string> header = split_csv(lines[0]);
  const std::size_t col = column_index(header, name);
  const std::size_t blow = column_index(header, "blow_up");
  double sum = 0.0;
  std::size_t live = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> row = split_csv(lines[i]);
    REQUIRE(row.size() == header.size());
    if (row[blow] != "0") continue;
    sum += std::strtod(row[col].c_str(), nullptr);
    ++live;
  }
  REQUIRE(live > 0);
  return sum / static_cast<double>(live);
}

nlohmann::json run_and_check_envelope(const RunConfig& config,
                                      const std::string& experiment) {
  const ExperimentOutput out = run_experiment(config);
  const nlohmann::json summary = nlohmann::json::parse(out.summary_json);
  CHECK(summary.at("schema").get<std::string>() == "spde-lab-summary-v1");
  CHECK(summary.at("experiment").get<std::string>() == experiment);
  CHECK(summary.at("config") ==
        nlohmann::json::parse(serialize_config(config)));
  CHECK(summary.at("wall_seconds").get<double>() >= 0.0);
  REQUIRE(summary.at("replications").is_array());
  CHECK(summary.at("replications").size() == config.seed_replications);

  // The summary on disk is the same document, and every listed artifact
  // exists under out_dir.
  CHECK(read_file(fs::path(config.out_dir) / "summary.json") ==
        out.summary_json);
  bool saw_summary = false;
  bool saw_plot = false;
  for (const std::string& name : out.files) {
    CHECK_MESSAGE(fs::exists(fs::path(config.out_dir) / name),
                  "missing artifact " << name);
    saw_summary = saw_summary || name == "summary.json";
    saw_plot = saw_plot || name == "plot_data.csv";
  }
  CHECK(saw_summary);
  CHECK(saw_plot);
  const std::string plot =
      read_file(fs::path(config.out_dir) / "plot_data.csv");
  CHECK(nonempty_lines(plot)[0] == "series,replication,functional,x,y");
  return summary;
}

}  // namespace

TEST_CASE("the variance self-check experiment passes on a sane grid") {
  const fs::path dir = fresh_out_dir("noise");
  RunConfig config = parse_config(R"({
    "experiment": "noise-selftest",
    "grid": {"final_time": 0.1, "length": 1.0, "time_steps": 200,
             "space_cells": 16},
    "paths": 4000, "master_seed": 777, "seed_replications": 2
  })");
  config.out_dir = dir.string();

  const nlohmann::json summary =
      run_and_check_envelope(config, "noise-selftest");
  const nlohmann::json& reps = summary.at("replications");
  REQUIRE(reps.size() == 2);
  for (std::size_t r = 0; r < 2; ++r) {
    const nlohmann::json& rep = reps.at(r);
    CHECK(rep.at("samples").get<std::size_t>() == 4000);
    CHECK(rep.at("lower").get<double>() == 0.95);
    CHECK(rep.at("upper").get<double>() == 1.05);
    const double ratio = rep.at("variance_ratio").get<double>();
    CHECK(ratio > 0.9);
    CHECK(ratio < 1.1);
    CHECK(rep.at("pass").get<bool>());
    const std::string csv_name =
        "noise_samples_rep" + std::to_string(r) + ".csv";
    CHECK(rep.at("samples_csv").get<std::string>() == csv_name);
    const std::string csv = read_file(dir / csv_name);
    const std::vector<std::string> lines = nonempty_lines(csv);
    CHECK(lines[0] == "path_index,w_tl");
    CHECK(lines.size() == 4001);
  }
  // Replications draw from distinct streams.
  CHECK(reps.at(0).at("seed") != reps.at(1).at("seed"));
  CHECK(reps.at(0).at("variance") != reps.at(1).at("variance"));

  const std::string plot = read_file(dir / "plot_data.csv");
  CHECK(plot.find("variance_ratio,0,") != std::string::npos);
  CHECK(plot.find("variance_ratio,1,") != std::string::npos);
}

TEST_CASE("the residual experiment shows contraction under refinement") {
  const fs::path dir = fresh_out_dir("residual");
  RunConfig config = parse_config(R"({
    "experiment": "residual-check",
    "grid": {"final_time": 0.1, "length": 1.0, "time_steps": 64,
             "space_cells": 16},
    "paths": 40, "master_seed": 31415
  })");
  config.out_dir = dir.string();

  const nlohmann::json summary =
      run_and_check_envelope(config, "residual-check");
  const nlohmann::json& rep = summary.at("replications").at(0);
  CHECK(rep.at("boundary").get<std::string>() == "neumann");
  CHECK(rep.at("refinement").get<std::string>() ==
        "time_steps x4, space_cells x2");
  const nlohmann::json& eigen = rep.at("eigen");
  CHECK(eigen.at("coarse").get<double>() > 0.0);
  CHECK(eigen.at("fine").get<double>() > 0.0);
  CHECK(eigen.at("ratio").get<double>() >= 3.0);
  const nlohmann::json& additive = rep.at("additive");
  CHECK(additive.at("paths").get<std::size_t>() == 40);
  CHECK(additive.at("coarse_rms").get<double>() >
        additive.at("fine_rms").get<double>());
  CHECK(additive.at("ratio").get<double>() > 1.0);

  const std::string csv =
      read_file(dir / rep.at("residuals_csv").get<std::string>());
  const std::vector<std::string> lines = nonempty_lines(csv);
  CHECK(lines[0] == "grid,path_index,residual");
  // Two eigen rows plus one row per path per grid.
  CHECK(lines.size() == 1 + 2 + 2 * 40);
}

TEST_CASE("the one-dimensional oracle experiment matches its closed form") {
  const fs::path dir = fresh_out_dir("sde");
  RunConfig config = parse_config(R"({
    "experiment": "sde-oracle",
    "grid": {"final_time": 1.0, "time_steps": 64},
    "paths": 20000, "sde_mu": 0.5,
    "bootstrap_resamples": 300, "master_seed": 424
  })");
  config.out_dir = dir.string();

  const nlohmann::json summary = run_and_check_envelope(config, "sde-oracle");
  const nlohmann::json& rep = summary.at("replications").at(0);
  CHECK(rep.at("paths").get<std::size_t>() == 20000);
  CHECK(rep.at("mu").get<double>() == 0.5);
  CHECK(rep.at("final_time").get<double>() == 1.0);
  CHECK(rep.at("direct_seed") != rep.at("weighted_seed"));
  CHECK(rep.at("target_mean").get<double>() == 0.5);
  CHECK(rep.at("target_second_moment").get<double>() == 1.25);

  CHECK(std::abs(rep.at("z_mean_vs_exact").get<double>()) < 4.0);
  CHECK(std::abs(rep.at("z_second_vs_exact").get<double>()) < 4.0);
  CHECK(std::abs(rep.at("z_two_sample").get<double>()) < 4.0);
  CHECK(rep.at("ks_p").get<double>() > 0.001);
  CHECK(rep.at("weighted_mean_stderr").get<double>() > 0.0);
  CHECK(rep.at("weighted_second_moment_stderr").get<double>() > 0.0);

  // Drifted arm sanity: sample mean near mu * T.
  const double direct_mean = rep.at("direct_mean").get<double>();
  const double direct_stderr = rep.at("direct_stderr").get<double>();
  CHECK(std::abs(direct_mean - 0.5) < 5.0 * direct_stderr);

  // ESS ratio tracks exp(-mu^2 T) for a constant tilt.
  const double ess_ratio = rep.at("ess").get<double>() / 20000.0;
  const double predicted = std::exp(-0.25);
  CHECK(ess_ratio > 0.85 * predicted);
  CHECK(ess_ratio < 1.15 * predicted);

  // The tilt is deterministic, so every path has r2 = mu^2 T exactly (the
  // step contributions are dyadic) and the second-moment certificate is
  // exp(mu^2 T / 2) with nothing discarded.
  const nlohmann::json& novikov = rep.at("novikov");
  CHECK(novikov.at("estimate").get<double>() ==
        doctest::Approx(std::exp(0.125)).epsilon(1e-12));
  CHECK(novikov.at("fraction_overflowed").get<double>() == 0.0);
  CHECK(novikov.at("retained").get<std::size_t>() == 20000);

  const std::string driftless =
      read_file(dir / rep.at("driftless_csv").get<std::string>());
  const std::vector<std::string> dlines = nonempty_lines(driftless);
  CHECK(dlines[0] == "path_index,b_t,log_xi,r2_terminal");
  CHECK(dlines.size() == 20001);
  const std::string direct =
      read_file(dir / rep.at("direct_csv").get<std::string>());
  const std::vector<std::string> dirlines = nonempty_lines(direct);
  CHECK(dirlines[0] == "path_index,b_t");
  CHECK(dirlines.size() == 20001);
}

TEST_CASE("a simulation run records per-path rows that reproduce its stats") {
  RunConfig config = parse_config(R"({
    "experiment": "simulate",
    "grid": {"final_time": 0.1, "length": 1.0, "time_steps": 100,
             "space_cells": 16},
    "paths": 400, "master_seed": 9090, "levels": [0.25, 1.0]
  })");

  const fs::path dir = fresh_out_dir("simulate");
  config.out_dir = dir.string();
  const nlohmann::json summary = run_and_check_envelope(config, "simulate");
  const nlohmann::json& rep = summary.at("replications").at(0);

  const std::size_t blow = rep.at("blow_up_count").get<std::size_t>();
  CHECK(blow < 40);  // the default phase-field desk setup is stable here
  const nlohmann::json& funcs = rep.at("functionals");
  REQUIRE(funcs.size() == 4);
  const std::vector<std::string> expected_names = {
      "point_value_at_0.5", "spatial_mean", "spatial_max", "l2_norm"};
  for (std::size_t f = 0; f < 4; ++f) {
    CHECK(funcs.at(f).at("functional").get<std::string>() ==
          expected_names[f]);
    CHECK(std::isfinite(funcs.at(f).at("mean").get<double>()));
    CHECK(funcs.at(f).at("stderr").get<double>() > 0.0);
    CHECK(funcs.at(f).at("paths").get<std::size_t>() == 400 - blow);
  }
  const nlohmann::json& coverage = rep.at("coverage");
  REQUIRE(coverage.size() == 2);
  // Survival past a larger truncation level is never rarer.
  CHECK(coverage.at(0).get<double>() <= coverage.at(1).get<double>());

  const std::string csv =
      read_file(dir / rep.at("ensemble_csv").get<std::string>());
  const std::vector<std::string> lines = nonempty_lines(csv);
  CHECK(lines[0] ==
        "path_index,blow_up,point_value_at_0.5,spatial_mean,spatial_max,"
        "l2_norm,log_xi_terminal,r2_terminal,stopped_log_xi_0.25,"
        "stopped_log_xi_1,tau_at_end_0.25,tau_at_end_1");
  CHECK(lines.size() == 401);

  // The summary statistics are recomputable from the CSV rows.
  const double mean_from_csv = live_column_mean(csv, "spatial_mean");
  CHECK(mean_from_csv ==
        doctest::Approx(funcs.at(1).at("mean").get<double>())
            .epsilon(1e-12));

  // Identical replication content regardless of the thread count, and
  // byte-identical ensemble CSVs.
  RunConfig one = config;
  one.threads = 1;
  const fs::path dir1 = fresh_out_dir("simulate_t1");
  one.out_dir = dir1.string();
  RunConfig three = config;
  three.threads = 3;
  const fs::path dir3 = fresh_out_dir("simulate_t3");
  three.out_dir = dir3.string();
  const nlohmann::json s1 = nlohmann::json::parse(
      run_experiment(one).summary_json);
  const nlohmann::json s3 = nlohmann::json::parse(
      run_experiment(three).summary_json);
  CHECK(s1.at("replications") == s3.at("replications"));
  CHECK(read_file(dir1 / "ensemble_rep0.csv") ==
        read_file(dir3 / "ensemble_rep0.csv"));
  CHECK(read_file(dir1 / "ensemble_rep0.csv") ==
        read_file(dir / "ensemble_rep0.csv"));
}

TEST_CASE("path export writes one long-form surface per requested path") {
  const fs::path dir = fresh_out_dir("export");
  RunConfig config = parse_config(R"({
    "experiment": "simulate",
    "grid": {"final_time": 0.05, "length": 1.0, "time_steps": 20,
             "space_cells": 8},
    "paths": 5, "master_seed": 66, "export_paths": true
  })");
  config.out_dir = dir.string();

  const nlohmann::json summary = run_and_check_envelope(config, "simulate");
  const nlohmann::json& rep = summary.at("replications").at(0);
  REQUIRE(rep.contains("exported_paths"));
  const nlohmann::json& exported = rep.at("exported_paths");
  REQUIRE(exported.size() == 5);
  CHECK(exported.at(0).get<std::string>() == "paths_rep0/path_00000.csv");
  for (const nlohmann::json& name : exported) {
    const std::string csv = read_file(dir / name.get<std::string>());
    const std::vector<std::string> lines = nonempty_lines(csv);
    CHECK(lines[0] == "t,x,u");
    CHECK(lines.size() == 1 + 21 * 8);
  }

  // The export cap bounds the file count even for large ensembles.
  RunConfig big = config;
  big.paths = 12;
  const fs::path dir2 = fresh_out_dir("export_cap");
  big.out_dir = dir2.string();
  const nlohmann::json s2 = nlohmann::json::parse(
      run_experiment(big).summary_json);
  CHECK(s2.at("replications").at(0).at("exported_paths").size() == 8);
}

TEST_CASE("a small constant-coefficient comparison run is coherent") {
  const fs::path dir = fresh_out_dir("compare");
  RunConfig config = parse_config(R"({
    "experiment": "compare-laws",
    "grid": {"final_time": 0.25, "length": 1.0, "time_steps": 64,
             "space_cells": 16},
    "coefficients": {"preset": "constant", "a": 1.0, "b": 0.0, "d": 1.0,
                      "h": 0.0},
    "paths": 1500, "master_seed": 5150, "levels": [1.0],
    "bootstrap_resamples": 200
  })");
  config.out_dir = dir.string();

  const nlohmann::json summary =
      run_and_check_envelope(config, "compare-laws");
  const nlohmann::json& rep = summary.at("replications").at(0);
  CHECK(rep.at("direct_seed") != rep.at("weighted_seed"));
  CHECK(rep.at("blow_up_direct").get<std::size_t>() == 0);
  CHECK(rep.at("blow_up_weighted").get<std::size_t>() == 0);

  // R = 1 gives r2 = T * L = 0.25 < 1.0 on every path: full coverage.
  CHECK(rep.at("coverage_direct") == nlohmann::json::array({1.0}));
  CHECK(rep.at("coverage_weighted") == nlohmann::json::array({1.0}));

  const nlohmann::json& report = rep.at("report");
  CHECK(report.at("live_direct").get<std::size_t>() == 1500);
  CHECK(report.at("live_weighted").get<std::size_t>() == 1500);
  CHECK(report.at("bootstrap_resamples").get<std::size_t>() == 200);
  const nlohmann::json& cells = report.at("cells");
  REQUIRE(cells.size() == 4);
  for (const nlohmann::json& cell : cells) {
    CHECK(cell.at("level").get<double>() == 1.0);
    CHECK(cell.at("sufficient").get<bool>());
    CHECK(cell.at("n_direct").get<std::size_t>() == 1500);
    CHECK(cell.at("n_weighted").get<std::size_t>() == 1500);
    CHECK(cell.at("coverage_direct").get<double>() == 1.0);
    CHECK(cell.at("coverage_weighted").get<double>() == 1.0);
    CHECK(cell.at("ess").get<double>() > 750.0);
    CHECK(cell.at("direct_stderr").get<double>() > 0.0);
    CHECK(cell.at("weighted_stderr").get<double>() > 0.0);
    CHECK(std::abs(cell.at("z").get<double>()) < 5.0);
    CHECK(cell.at("ks_p").get<double>() > 0.001);
  }

  const nlohmann::json& martingale = rep.at("martingale");
  REQUIRE(martingale.size() == 1);
  CHECK(martingale.at(0).at("level").get<double>() == 1.0);
  CHECK(martingale.at(0).at("paths").get<std::size_t>() == 1500);
  const double m_mean = martingale.at(0).at("mean").get<double>();
  const double m_stderr = martingale.at(0).at("stderr").get<double>();
  CHECK(m_stderr > 0.0);
  CHECK(std::abs(m_mean - 1.0) < 5.0 * m_stderr);

  // Constant tilt: r2 is the same dyadic value on every path, so the
  // second-moment certificate is exact.
  CHECK(rep.at("novikov").at("estimate").get<double>() ==
        doctest::Approx(std::exp(0.125)).epsilon(1e-12));

  // Summary cells are recomputable from the per-path CSV rows. Coverage is
  // full, so the restricted mean is the plain live mean.
  const std::string direct_csv =
      read_file(dir / rep.at("direct_csv").get<std::string>());
  const double point_mean = live_column_mean(direct_csv, "point_value_at_0.5");
  CHECK(point_mean ==
        doctest::Approx(cells.at(0).at("direct_mean").get<double>())
            .epsilon(1e-10));
  const std::string rew_csv =
      read_file(dir / rep.at("reweighted_csv").get<std::string>());
  CHECK(nonempty_lines(rew_csv).size() == 1501);
  CHECK(nonempty_lines(rew_csv)[0].find("stopped_log_xi_1") !=
        std::string::npos);

  const std::string plot = read_file(dir / "plot_data.csv");
  CHECK(plot.find("coverage_direct,0,,1,1") != std::string::npos);
  CHECK(plot.find("martingale_mean,0,") != std::string::npos);
  CHECK(plot.find("z,0,point_value_at_0.5,") != std::string::npos);
}

TEST_CASE("plot data extraction rejects documents it does not recognize") {
  try {
    emit_plot_data("{");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("not valid JSON") != std::string::npos);
  }
  try {
    emit_plot_data(R"({"schema": "something-else"})");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("not a recognized summary document") !=
          std::string::npos);
  }
}

TEST_CASE("an unwritable output directory fails with an IO error") {
  RunConfig config = parse_config(R"({
    "experiment": "noise-selftest",
    "grid": {"final_time": 0.01, "time_steps": 2, "space_cells": 2},
    "paths": 2
  })");
  config.out_dir = "/dev/null/nested";
  CHECK_THROWS_AS(run_experiment(config), IoError);
}
