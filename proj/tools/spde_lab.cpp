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

// Command-line front end. Talks to the core exclusively through the C API;
// argument handling and the stdout digest live here, numerics live behind
// the library boundary.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"
#include "spdelab.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 4;

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  std::int64_t threads = 0;
  std::string out_dir;
  bool export_paths = false;
};

std::string fmt(const nlohmann::json& v) {
  if (!v.is_number()) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v.get<double>());
  return buf;
}

// One line per replication so a run's health is visible without opening
// the summary. Every number here is copied from summary.json.
void print_digest(const nlohmann::json& summary) {
  const std::string experiment = summary.at("experiment");
  const nlohmann::json& reps = summary.at("replications");
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const nlohmann::json& rep = reps[r];
    std::string line = "rep " + std::to_string(r) + ":";
    if (experiment == "noise-selftest") {
      line += " variance_ratio=" + fmt(rep.at("variance_ratio"));
      line += rep.at("pass").get<bool>() ? " pass=yes" : " pass=no";
    } else if (experiment == "residual-check") {
      line += " eigen_ratio=" + fmt(rep.at("eigen").at("ratio"));
      line += " additive_ratio=" + fmt(rep.at("additive").at("ratio"));
    } else if (experiment == "sde-oracle") {
      line += " z_mean=" + fmt(rep.at("z_mean_vs_exact"));
      line += " z_second=" + fmt(rep.at("z_second_vs_exact"));
      line += " z_two_sample=" + fmt(rep.at("z_two_sample"));
      line += " ks_p=" + fmt(rep.at("ks_p"));
      line += " ess=" + fmt(rep.at("ess"));
    } else if (experiment == "simulate") {
      for (const nlohmann::json& fj : rep.at("functionals")) {
        line += " " + fj.at("functional").get<std::string>() + "=" +
                fmt(fj.at("mean")) + "+-" + fmt(fj.at("stderr"));
      }
      line += " blow_up=" + rep.at("blow_up_count").dump();
    } else if (experiment == "compare-laws") {
      double max_abs_z = 0.0;
      double min_ks_p = std::numeric_limits<double>::infinity();
      std::size_t sufficient = 0;
      std::size_t insufficient = 0;
      for (const nlohmann::json& cell : rep.at("report").at("cells")) {
        if (!cell.at("sufficient").get<bool>()) {
          ++insufficient;
          continue;
        }
        ++sufficient;
        if (cell.at("z").is_number()) {
          max_abs_z = std::max(max_abs_z,
                               std::abs(cell.at("z").get<double>()));
        }
        if (cell.at("ks_p").is_number()) {
          min_ks_p = std::min(min_ks_p, cell.at("ks_p").get<double>());
        }
      }
      if (sufficient > 0) {
        line += " max|z|=" + fmt(max_abs_z);
        line += " min_ks_p=" + fmt(min_ks_p);
      }
      if (insufficient > 0) {
        line += " insufficient_cells=" + std::to_string(insufficient);
      }
      const nlohmann::json& cov = rep.at("coverage_weighted");
      if (!cov.empty()) {
        line += " coverage_weighted_last=" + fmt(cov.back());
      }
    }
    std::printf("%s\n", line.c_str());
  }
}

int fail_status(spde_status status) {
  std::fprintf(stderr, "error: %s\n", spde_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Monte Carlo laboratory for one-dimensional stochastic heat "
      "equations: simulation, drift reweighting, and two-sample law "
      "comparison."};
  app.set_version_flag("--version", [] { return std::string(spde_version()); });
  app.require_subcommand(1);

  Options opt;
  const std::pair<const char*, const char*> kinds[] = {
      {"noise-selftest", "Variance self-test of the driving noise field"},
      {"residual-check", "Weak-form residual convergence check"},
      {"sde-oracle",
       "One-dimensional reweighting check against closed-form moments"},
      {"simulate", "Direct ensemble simulation with summary statistics"},
      {"compare-laws",
       "Two-arm comparison: direct drifted vs reweighted driftless"},
  };
  for (const auto& [name, description] : kinds) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", opt.config_path,
                    "JSON configuration file (defaults apply when omitted)");
    sub->add_option("--seed", opt.seed, "Master seed override")
        ->envname("SPDE_LAB_SEED");
    sub->add_option("--threads", opt.threads,
                    "Worker threads (0 = all hardware threads)");
    sub->add_option("--out", opt.out_dir, "Output directory override");
    sub->add_flag("--export-paths", opt.export_paths,
                  "Also write per-path CSVs for the first few paths");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  CLI::App* sub = app.get_subcommands().front();

  nlohmann::json config = nlohmann::json::object();
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path, std::ios::binary);
    if (!in) {
      std::fprintf(stderr, "error: cannot open configuration file '%s'\n",
                   opt.config_path.c_str());
      return kExitIo;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) {
      std::fprintf(stderr, "error: failed reading '%s'\n",
                   opt.config_path.c_str());
      return kExitIo;
    }
    try {
      config = nlohmann::json::parse(buffer.str());
    } catch (const nlohmann::json::parse_error& e) {
      std::fprintf(stderr, "error: config: %s\n", e.what());
      return kExitConfig;
    }
    if (!config.is_object()) {
      std::fprintf(stderr, "error: config: root must be a JSON object\n");
      return kExitConfig;
    }
  }

  // The subcommand names the experiment; flags (and SPDE_LAB_SEED) beat
  // the file, the file beats built-in defaults.
  config["experiment"] = sub->get_name();
  if (sub->count("--seed") > 0) config["master_seed"] = opt.seed;
  if (sub->count("--threads") > 0) config["threads"] = opt.threads;
  if (sub->count("--out") > 0) config["out_dir"] = opt.out_dir;
  if (sub->count("--export-paths") > 0) config["export_paths"] = true;

  spde_run* run = nullptr;
  spde_status status = spde_run_create(config.dump().c_str(), &run);
  if (status != SPDE_OK) return fail_status(status);

  status = spde_run_execute(run);
  if (status != SPDE_OK) {
    spde_run_destroy(run);
    return fail_status(status);
  }

  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(spde_run_summary_json(run));
    print_digest(summary);
    const nlohmann::json& echo = summary.at("config");
    std::printf("summary: %s/summary.json\n",
                echo.at("out_dir").get<std::string>().c_str());
    std::printf("wall_seconds: %s\n", fmt(summary.at("wall_seconds")).c_str());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: malformed summary: %s\n", e.what());
    spde_run_destroy(run);
    return 3;
  }
  spde_run_destroy(run);
  return 0;
}
