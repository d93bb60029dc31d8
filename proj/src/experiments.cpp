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

#include "experiments.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "girsanov.hpp"
#include "grid.hpp"
#include "heat_solver.hpp"
#include "json.hpp"
#include "law_compare.hpp"
#include "noise.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sde.hpp"
#include "summation.hpp"

namespace spde {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kSummarySchema = "spde-lab-summary-v1";
constexpr std::size_t kMaxExportedPaths = 8;
constexpr double kVarianceLower = 0.95;
constexpr double kVarianceUpper = 1.05;
constexpr std::size_t kResidualPathCap = 200;
constexpr std::size_t kResidualMode = 1;

// Purposes for seed derivation. Replications get their own stream family;
// within a replication, every consumer draws from a disjoint family. The
// two arms of a two-arm experiment are deliberately independent: the claim
// under test concerns laws, not pathwise coupling.
constexpr std::uint64_t kPurposeReplication = 0xA000;
constexpr std::uint64_t kPurposeDirectArm = 1;
constexpr std::uint64_t kPurposeWeightedArm = 2;
constexpr std::uint64_t kPurposeReport = 3;
constexpr std::uint64_t kPurposeNoise = 4;
constexpr std::uint64_t kPurposeResidual = 5;
constexpr std::uint64_t kPurposeBootMean = 6;
constexpr std::uint64_t kPurposeBootSecond = 7;
constexpr std::uint64_t kPurposeKs = 8;

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

std::uint64_t replication_seed(const RunConfig& config, std::size_t rep) {
  return rng::derive_seed(config.master_seed, kPurposeReplication + rep);
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out.write(content.data(),
            static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out.good()) {
    throw IoError("failed while writing '" + path.string() + "'");
  }
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory '" + dir.string() +
                  "': " + ec.message());
  }
}

/// One row per path; every statistic in the summary is recomputable from
/// these columns.
std::string ensemble_csv(const EnsembleResult& e) {
  const std::size_t n_funcs = e.n_functionals();
  const std::size_t n_levels = e.n_levels();
  std::string out;
  out.reserve(64 + e.paths() * 24 * (3 + n_funcs + 2 * n_levels));
  out += "path_index,blow_up";
  for (const FunctionalSpec& f : e.functionals) {
    out += ',';
    out += f.name();
  }
  out += ",log_xi_terminal,r2_terminal";
  for (double lvl : e.levels) out += ",stopped_log_xi_" + format_double(lvl);
  for (double lvl : e.levels) out += ",tau_at_end_" + format_double(lvl);
  out += '\n';
  for (std::size_t p = 0; p < e.paths(); ++p) {
    out += std::to_string(p);
    out += e.blow_up[p] ? ",1" : ",0";
    for (std::size_t f = 0; f < n_funcs; ++f) {
      out += ',';
      out += format_double(e.value(p, f));
    }
    out += ',';
    out += format_double(e.log_weight[p]);
    out += ',';
    out += format_double(e.r2_terminal[p]);
    for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
      out += ',';
      out += format_double(e.stopped_log(p, lvl));
    }
    for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
      out += e.tau_flag(p, lvl) ? ",1" : ",0";
    }
    out += '\n';
  }
  return out;
}

ordered_json cell_to_json(const LevelFunctionalStats& c) {
  ordered_json j;
  j["level"] = c.level;
  j["functional"] = c.functional;
  j["sufficient"] = c.sufficient;
  j["n_direct"] = c.n_direct;
  j["n_weighted"] = c.n_weighted;
  j["coverage_direct"] = c.coverage_direct;
  j["coverage_weighted"] = c.coverage_weighted;
  j["ess"] = c.ess;
  j["direct_mean"] = c.direct_mean;
  j["direct_stderr"] = c.direct_stderr;
  j["weighted_mean"] = c.weighted_mean;
  j["weighted_stderr"] = c.weighted_stderr;
  j["z"] = c.z;
  j["ks_stat"] = c.ks_stat;
  j["ks_p"] = c.ks_p;
  return j;
}

ordered_json report_to_json(const TestReport& r) {
  ordered_json j;
  j["levels"] = r.levels;
  j["functionals"] = r.functionals;
  j["live_direct"] = r.live_direct;
  j["live_weighted"] = r.live_weighted;
  j["bootstrap_resamples"] = r.bootstrap_resamples;
  j["report_seed"] = r.report_seed;
  ordered_json cells = ordered_json::array();
  for (const LevelFunctionalStats& c : r.cells) {
    cells.push_back(cell_to_json(c));
  }
  j["cells"] = cells;
  return j;
}

ordered_json novikov_to_json(const NovikovEstimate& n) {
  ordered_json j;
  j["estimate"] = n.estimate;
  j["fraction_overflowed"] = n.fraction_overflowed;
  j["retained"] = n.retained;
  return j;
}

/// Shift to the maximum and rescale to mean one: the relative weights are
/// unchanged and both arms of a pooled test live on one scale.
std::vector<double> normalized_weights(std::span<const double> log_weights) {
  const double max_log =
      *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> w(log_weights.size());
  CompensatedSum sum;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i] - max_log);
    sum.add(w[i]);
  }
  const double rescale = static_cast<double>(w.size()) / sum.value();
  for (double& v : w) v *= rescale;
  return w;
}

std::string path_file_name(std::size_t p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "path_%05zu.csv", p);
  return buf;
}

/// Re-simulates the first few paths with the reference single-path solver
/// (bit-identical to the ensemble runner) and writes them in long form.
std::vector<std::string> export_path_csvs(const fs::path& root,
                                          const std::string& subdir,
                                          const RunConfig& config,
                                          const CoefficientSet& coeffs,
                                          bool include_d,
                                          std::uint64_t arm_seed) {
  const Grid grid = make_grid(config);
  const HeatSolver solver(grid, config.boundary, make_scheme(config));
  const std::size_t count =
      std::min<std::size_t>(config.paths, kMaxExportedPaths);
  ensure_directory(root / subdir);
  std::vector<std::string> names;
  for (std::size_t p = 0; p < count; ++p) {
    const NoiseField noise = sample_noise(grid, arm_seed, p);
    std::string csv = "t,x,u\n";
    csv.reserve((grid.time_steps() + 1) * grid.space_cells() * 40);
    try {
      const PathField path = solver.simulate_path(coeffs, include_d, noise);
      for (std::size_t k = 0; k <= grid.time_steps(); ++k) {
        const std::string t = format_double(grid.time_at(k));
        for (std::size_t j = 0; j < grid.space_cells(); ++j) {
          csv += t;
          csv += ',';
          csv += format_double(grid.cell_center(j));
          csv += ',';
          csv += format_double(path.at(k, j));
          csv += '\n';
        }
      }
    } catch (const PathBlowUpError&) {
      continue;  // excluded from the ensemble statistics as well
    }
    const std::string name = subdir + "/" + path_file_name(p);
    write_text_file(root / name, csv);
    names.push_back(name);
  }
  return names;
}

// ---------------------------------------------------------------------------
// noise-selftest

ordered_json run_noise_selftest(const RunConfig& config, const fs::path& root,
                                std::vector<std::string>& files) {
  const Grid grid = make_grid(config);
  const std::size_t n = config.paths;
  ordered_json reps = ordered_json::array();
  for (std::size_t rep = 0; rep < config.seed_replications; ++rep) {
    const std::uint64_t seed =
        rng::derive_seed(replication_seed(config, rep), kPurposeNoise);
    std::vector<double> samples(n);
    parallel_for_index(n, config.threads, [&](std::size_t p) {
      std::vector<double> row(grid.space_cells());
      CompensatedSum sum;
      for (std::size_t k = 0; k < grid.time_steps(); ++k) {
        sample_noise_row(grid, seed, p, k, row);
        for (double v : row) sum.add(v);
      }
      samples[p] = sum.value();
    });
    CompensatedSum mean_sum;
    for (double s : samples) mean_sum.add(s);
    const double mean = mean_sum.value() / static_cast<double>(n);
    CompensatedSum sq;
    for (double s : samples) sq.add((s - mean) * (s - mean));
    const double variance = sq.value() / static_cast<double>(n - 1);
    const double ratio =
        variance / (grid.final_time() * grid.length());

    std::string csv = "path_index,w_tl\n";
    csv.reserve(n * 28);
    for (std::size_t p = 0; p < n; ++p) {
      csv += std::to_string(p);
      csv += ',';
      csv += format_double(samples[p]);
      csv += '\n';
    }
    const std::string name =
        "noise_samples_rep" + std::to_string(rep) + ".csv";
    write_text_file(root / name, csv);
    files.push_back(name);

    ordered_json j;
    j["seed"] = seed;
    j["samples"] = n;
    j["mean"] = mean;
    j["variance"] = variance;
    j["variance_ratio"] = ratio;
    j["lower"] = kVarianceLower;
    j["upper"] = kVarianceUpper;
    j["pass"] = ratio >= kVarianceLower && ratio <= kVarianceUpper;
    j["samples_csv"] = name;
    reps.push_back(j);
  }
  return reps;
}

// ---------------------------------------------------------------------------
// residual-check

ordered_json run_residual_check(const RunConfig& config, const fs::path& root,
                                std::vector<std::string>& files) {
  // The test functions satisfy zero-slope ends, so the residual check runs
  // against the mirrored-flux operator regardless of the configured
  // boundary.
  const BoundaryKind boundary = BoundaryKind::kNeumann;
  const Grid coarse = make_grid(config);
  const Grid fine(config.final_time, config.length, 4 * config.time_steps,
                  2 * config.space_cells);
  const std::size_t n_paths =
      std::min<std::size_t>(config.paths, kResidualPathCap);

  CoefficientSet eigen_coeffs = zero_drift_preset(0.0);
  eigen_coeffs.h = [length = config.length](double x) {
    return std::cos(static_cast<double>(kResidualMode) *
                    std::numbers::pi_v<double> * x / length);
  };
  const CoefficientSet additive_coeffs = zero_drift_preset(0.0);

  auto eigen_residual = [&](const Grid& grid) {
    const HeatSolver solver(grid, boundary, SchemeConfig{});
    const NoiseField zero{
        .grid = grid,
        .increments = std::vector<double>(
            grid.time_steps() * grid.space_cells(), 0.0),
    };
    const PathField path = solver.simulate_path(eigen_coeffs, false, zero);
    return weak_form_residual(path, zero, eigen_coeffs, false,
                              kResidualMode);
  };

  ordered_json reps = ordered_json::array();
  for (std::size_t rep = 0; rep < config.seed_replications; ++rep) {
    const std::uint64_t seed =
        rng::derive_seed(replication_seed(config, rep), kPurposeResidual);
    const double eigen_coarse = eigen_residual(coarse);
    const double eigen_fine = eigen_residual(fine);

    auto additive_residuals = [&](const Grid& grid) {
      const HeatSolver solver(grid, boundary, SchemeConfig{});
      std::vector<double> residuals(n_paths);
      parallel_for_index(n_paths, config.threads, [&](std::size_t p) {
        const NoiseField noise = sample_noise(grid, seed, p);
        const PathField path =
            solver.simulate_path(additive_coeffs, false, noise);
        residuals[p] = weak_form_residual(path, noise, additive_coeffs,
                                          false, kResidualMode);
      });
      return residuals;
    };
    auto rms_of = [](const std::vector<double>& residuals) {
      CompensatedSum sq;
      for (double r : residuals) sq.add(r * r);
      return std::sqrt(sq.value() /
                       static_cast<double>(residuals.size()));
    };
    const std::vector<double> coarse_res = additive_residuals(coarse);
    const std::vector<double> fine_res = additive_residuals(fine);
    const double coarse_rms = rms_of(coarse_res);
    const double fine_rms = rms_of(fine_res);

    std::string csv = "grid,path_index,residual\n";
    csv += "eigen_coarse,0," + format_double(eigen_coarse) + "\n";
    csv += "eigen_fine,0," + format_double(eigen_fine) + "\n";
    for (std::size_t p = 0; p < n_paths; ++p) {
      csv += "additive_coarse," + std::to_string(p) + ',' +
             format_double(coarse_res[p]) + '\n';
    }
    for (std::size_t p = 0; p < n_paths; ++p) {
      csv += "additive_fine," + std::to_string(p) + ',' +
             format_double(fine_res[p]) + '\n';
    }
    const std::string name = "residuals_rep" + std::to_string(rep) + ".csv";
    write_text_file(root / name, csv);
    files.push_back(name);

    ordered_json j;
    j["seed"] = seed;
    j["mode"] = kResidualMode;
    j["boundary"] = "neumann";
    j["refinement"] = "time_steps x4, space_cells x2";
    j["eigen"] = {{"coarse", eigen_coarse},
                  {"fine", eigen_fine},
                  {"ratio", eigen_coarse / eigen_fine}};
    j["additive"] = {{"paths", n_paths},
                     {"coarse_rms", coarse_rms},
                     {"fine_rms", fine_rms},
                     {"ratio", coarse_rms / fine_rms}};
    j["residuals_csv"] = name;
    reps.push_back(j);
  }
  return reps;
}

// ---------------------------------------------------------------------------
// sde-oracle

ordered_json run_sde_oracle(const RunConfig& config, const fs::path& root,
                            std::vector<std::string>& files) {
  const std::size_t n = config.paths;
  const double mu = config.sde_mu;
  const double final_time = config.final_time;

  SdeSpec driftless;
  driftless.mu = [](double) { return 0.0; };
  driftless.sigma = [](double) { return 1.0; };
  driftless.u0 = 0.0;
  driftless.final_time = final_time;
  driftless.time_steps = config.time_steps;
  SdeSpec drifted = driftless;
  drifted.mu = [mu](double) { return mu; };
  const std::function<double(double)> ratio = [mu](double) { return mu; };

  ordered_json reps = ordered_json::array();
  for (std::size_t rep = 0; rep < config.seed_replications; ++rep) {
    const std::uint64_t rep_seed = replication_seed(config, rep);
    const std::uint64_t seed_direct =
        rng::derive_seed(rep_seed, kPurposeDirectArm);
    const std::uint64_t seed_weighted =
        rng::derive_seed(rep_seed, kPurposeWeightedArm);

    std::vector<double> base(n);
    std::vector<double> logs(n);
    std::vector<double> r2(n);
    std::vector<double> drifted_values(n);
    parallel_for_index(n, config.threads, [&](std::size_t p) {
      const SdePath path = simulate_sde(driftless, seed_weighted, p);
      base[p] = path.u.back();
      const WeightTrajectory wt = girsanov_weight_1d(path, ratio);
      logs[p] = wt.log_xi_terminal();
      r2[p] = wt.r2_terminal();
    });
    parallel_for_index(n, config.threads, [&](std::size_t p) {
      drifted_values[p] = simulate_sde(drifted, seed_direct, p).u.back();
    });

    const double ess = effective_sample_size(logs);
    const std::vector<double> weights = normalized_weights(logs);
    const BootstrapMean first = weighted_mean_bootstrap(
        base, weights, config.bootstrap_resamples,
        rng::derive_seed(rep_seed, kPurposeBootMean), config.threads);
    std::vector<double> squared(n);
    for (std::size_t p = 0; p < n; ++p) squared[p] = base[p] * base[p];
    const BootstrapMean second = weighted_mean_bootstrap(
        squared, weights, config.bootstrap_resamples,
        rng::derive_seed(rep_seed, kPurposeBootSecond), config.threads);

    const double target_mean = analytic_tilt_moments(mu, final_time, 1);
    const double target_second = analytic_tilt_moments(mu, final_time, 2);
    auto z_against = [](double value, double target, double stderr_value) {
      const double diff = value - target;
      if (diff == 0.0) return 0.0;
      return stderr_value > 0.0
                 ? diff / stderr_value
                 : std::copysign(std::numeric_limits<double>::infinity(),
                                 diff);
    };

    CompensatedSum dsum;
    for (double v : drifted_values) dsum.add(v);
    const double direct_mean = dsum.value() / static_cast<double>(n);
    CompensatedSum dsq;
    for (double v : drifted_values) {
      dsq.add((v - direct_mean) * (v - direct_mean));
    }
    const double direct_stderr =
        std::sqrt(dsq.value() / static_cast<double>(n - 1) /
                  static_cast<double>(n));

    const double two_sample_denom =
        std::sqrt(direct_stderr * direct_stderr +
                  first.stderr_boot * first.stderr_boot);
    const double two_sample_diff = direct_mean - first.mean;
    const double z_two_sample =
        two_sample_diff == 0.0
            ? 0.0
            : (two_sample_denom > 0.0
                   ? two_sample_diff / two_sample_denom
                   : std::copysign(
                         std::numeric_limits<double>::infinity(),
                         two_sample_diff));

    const std::vector<double> unit(n, 1.0);
    const KsResult ks = weighted_ks_test(
        drifted_values, unit, base, weights, config.bootstrap_resamples,
        rng::derive_seed(rep_seed, kPurposeKs), config.threads);
    const NovikovEstimate novikov = novikov_estimate(r2);

    std::string csv = "path_index,b_t,log_xi,r2_terminal\n";
    csv.reserve(n * 60);
    for (std::size_t p = 0; p < n; ++p) {
      csv += std::to_string(p);
      csv += ',';
      csv += format_double(base[p]);
      csv += ',';
      csv += format_double(logs[p]);
      csv += ',';
      csv += format_double(r2[p]);
      csv += '\n';
    }
    const std::string driftless_name =
        "sde_driftless_rep" + std::to_string(rep) + ".csv";
    write_text_file(root / driftless_name, csv);
    files.push_back(driftless_name);

    std::string direct_csv = "path_index,b_t\n";
    direct_csv.reserve(n * 28);
    for (std::size_t p = 0; p < n; ++p) {
      direct_csv += std::to_string(p);
      direct_csv += ',';
      direct_csv += format_double(drifted_values[p]);
      direct_csv += '\n';
    }
    const std::string direct_name =
        "sde_direct_rep" + std::to_string(rep) + ".csv";
    write_text_file(root / direct_name, direct_csv);
    files.push_back(direct_name);

    ordered_json j;
    j["replication_seed"] = rep_seed;
    j["direct_seed"] = seed_direct;
    j["weighted_seed"] = seed_weighted;
    j["paths"] = n;
    j["mu"] = mu;
    j["final_time"] = final_time;
    j["weighted_mean"] = first.mean;
    j["weighted_mean_stderr"] = first.stderr_boot;
    j["target_mean"] = target_mean;
    j["z_mean_vs_exact"] = z_against(first.mean, target_mean,
                                     first.stderr_boot);
    j["weighted_second_moment"] = second.mean;
    j["weighted_second_moment_stderr"] = second.stderr_boot;
    j["target_second_moment"] = target_second;
    j["z_second_vs_exact"] =
        z_against(second.mean, target_second, second.stderr_boot);
    j["direct_mean"] = direct_mean;
    j["direct_stderr"] = direct_stderr;
    j["z_two_sample"] = z_two_sample;
    j["ks_stat"] = ks.statistic;
    j["ks_p"] = ks.p_value;
    j["ess"] = ess;
    j["novikov"] = novikov_to_json(novikov);
    j["driftless_csv"] = driftless_name;
    j["direct_csv"] = direct_name;
    reps.push_back(j);
  }
  return reps;
}

// ---------------------------------------------------------------------------
// simulate

ordered_json run_simulate(const RunConfig& config, const fs::path& root,
                          std::vector<std::string>& files) {
  const CoefficientSet coeffs = make_coefficients(config);
  ordered_json reps = ordered_json::array();
  for (std::size_t rep = 0; rep < config.seed_replications; ++rep) {
    const std::uint64_t rep_seed = replication_seed(config, rep);
    const std::uint64_t arm_seed =
        rng::derive_seed(rep_seed, kPurposeDirectArm);
    const EnsembleResult ens =
        run_direct(coeffs, make_ensemble_config(config, arm_seed));

    const std::string name = "ensemble_rep" + std::to_string(rep) + ".csv";
    write_text_file(root / name, ensemble_csv(ens));
    files.push_back(name);

    ordered_json functionals = ordered_json::array();
    for (std::size_t f = 0; f < ens.n_functionals(); ++f) {
      CompensatedSum sum;
      std::size_t live = 0;
      for (std::size_t p = 0; p < ens.paths(); ++p) {
        if (ens.blow_up[p]) continue;
        sum.add(ens.value(p, f));
        ++live;
      }
      const double mean =
          live > 0 ? sum.value() / static_cast<double>(live)
                   : std::numeric_limits<double>::quiet_NaN();
      double stderr_value = 0.0;
      if (live >= 2) {
        CompensatedSum sq;
        for (std::size_t p = 0; p < ens.paths(); ++p) {
          if (ens.blow_up[p]) continue;
          sq.add((ens.value(p, f) - mean) * (ens.value(p, f) - mean));
        }
        stderr_value = std::sqrt(sq.value() /
                                 static_cast<double>(live - 1) /
                                 static_cast<double>(live));
      }
      ordered_json fj;
      fj["functional"] = ens.functionals[f].name();
      fj["mean"] = mean;
      fj["stderr"] = stderr_value;
      fj["paths"] = live;
      functionals.push_back(fj);
    }

    ordered_json j;
    j["replication_seed"] = rep_seed;
    j["arm_seed"] = arm_seed;
    j["functionals"] = functionals;
    j["coverage"] = tau_coverage(ens);
    j["blow_up_count"] = ens.blow_up_count;
    j["ensemble_csv"] = name;
    if (config.export_paths) {
      const std::vector<std::string> exported =
          export_path_csvs(root, "paths_rep" + std::to_string(rep), config,
                           coeffs, /*include_d=*/true, arm_seed);
      for (const std::string& e : exported) files.push_back(e);
      j["exported_paths"] = exported;
    }
    reps.push_back(j);
  }
  return reps;
}

// ---------------------------------------------------------------------------
// compare-laws

ordered_json run_compare_laws(const RunConfig& config, const fs::path& root,
                              std::vector<std::string>& files) {
  const CoefficientSet coeffs = make_coefficients(config);
  ordered_json reps = ordered_json::array();
  for (std::size_t rep = 0; rep < config.seed_replications; ++rep) {
    const std::uint64_t rep_seed = replication_seed(config, rep);
    const std::uint64_t seed_direct =
        rng::derive_seed(rep_seed, kPurposeDirectArm);
    const std::uint64_t seed_weighted =
        rng::derive_seed(rep_seed, kPurposeWeightedArm);
    const std::uint64_t seed_report =
        rng::derive_seed(rep_seed, kPurposeReport);

    const EnsembleResult direct =
        run_direct(coeffs, make_ensemble_config(config, seed_direct));
    const EnsembleResult rew =
        run_reweighted(coeffs, make_ensemble_config(config, seed_weighted));

    CompareOptions options;
    options.bootstrap_resamples = config.bootstrap_resamples;
    options.report_seed = seed_report;
    options.threads = config.threads;
    const TestReport report = compare_laws(direct, rew, options);

    ordered_json martingale = ordered_json::array();
    for (std::size_t lvl = 0; lvl < rew.n_levels(); ++lvl) {
      const MartingaleCheck check = stopped_weight_mean(rew, lvl);
      ordered_json m;
      m["level"] = rew.levels[lvl];
      m["mean"] = check.mean;
      m["stderr"] = check.mean_stderr;
      m["paths"] = check.paths;
      martingale.push_back(m);
    }

    std::vector<double> live_r2;
    live_r2.reserve(rew.paths());
    for (std::size_t p = 0; p < rew.paths(); ++p) {
      if (rew.blow_up[p] == 0) live_r2.push_back(rew.r2_terminal[p]);
    }
    const NovikovEstimate novikov = novikov_estimate(live_r2);

    const std::string direct_name =
        "ensemble_direct_rep" + std::to_string(rep) + ".csv";
    const std::string rew_name =
        "ensemble_reweighted_rep" + std::to_string(rep) + ".csv";
    write_text_file(root / direct_name, ensemble_csv(direct));
    write_text_file(root / rew_name, ensemble_csv(rew));
    files.push_back(direct_name);
    files.push_back(rew_name);

    ordered_json j;
    j["replication_seed"] = rep_seed;
    j["direct_seed"] = seed_direct;
    j["weighted_seed"] = seed_weighted;
    j["report"] = report_to_json(report);
    j["coverage_direct"] = tau_coverage(direct);
    j["coverage_weighted"] = tau_coverage(rew);
    j["martingale"] = martingale;
    j["novikov"] = novikov_to_json(novikov);
    j["blow_up_direct"] = direct.blow_up_count;
    j["blow_up_weighted"] = rew.blow_up_count;
    j["direct_csv"] = direct_name;
    j["reweighted_csv"] = rew_name;
    if (config.export_paths) {
      const std::vector<std::string> exported_direct = export_path_csvs(
          root, "paths_direct_rep" + std::to_string(rep), config, coeffs,
          /*include_d=*/true, seed_direct);
      const std::vector<std::string> exported_rew = export_path_csvs(
          root, "paths_reweighted_rep" + std::to_string(rep), config,
          coeffs, /*include_d=*/false, seed_weighted);
      for (const std::string& e : exported_direct) files.push_back(e);
      for (const std::string& e : exported_rew) files.push_back(e);
      j["exported_paths_direct"] = exported_direct;
      j["exported_paths_reweighted"] = exported_rew;
    }
    reps.push_back(j);
  }
  return reps;
}

// ---------------------------------------------------------------------------
// plot data helpers

double number_or_nan(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>()
                       : std::numeric_limits<double>::quiet_NaN();
}

void plot_row(std::string& out, const std::string& series, std::size_t rep,
              const std::string& functional, double x, double y) {
  if (!std::isfinite(y)) return;
  out += series;
  out += ',';
  out += std::to_string(rep);
  out += ',';
  out += functional;
  out += ',';
  out += format_double(x);
  out += ',';
  out += format_double(y);
  out += '\n';
}

}  // namespace

ExperimentOutput run_experiment(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path root(config.out_dir);
  ensure_directory(root);

  std::vector<std::string> files;
  ordered_json summary;
  summary["schema"] = kSummarySchema;
  summary["experiment"] = experiment_name(config.experiment);
  summary["config"] = ordered_json::parse(serialize_config(config));

  ordered_json reps;
  switch (config.experiment) {
    case ExperimentKind::kNoiseSelfTest:
      reps = run_noise_selftest(config, root, files);
      break;
    case ExperimentKind::kResidualCheck:
      reps = run_residual_check(config, root, files);
      break;
    case ExperimentKind::kSdeOracle:
      reps = run_sde_oracle(config, root, files);
      break;
    case ExperimentKind::kSimulate:
      reps = run_simulate(config, root, files);
      break;
    case ExperimentKind::kCompareLaws:
      reps = run_compare_laws(config, root, files);
      break;
  }
  summary["replications"] = reps;
  summary["artifacts"] = files;
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  summary["wall_seconds"] = elapsed.count();

  ExperimentOutput output;
  output.summary_json = summary.dump(2);
  write_text_file(root / "summary.json", output.summary_json);
  const std::string plot = emit_plot_data(output.summary_json);
  write_text_file(root / "plot_data.csv", plot);
  output.files = files;
  output.files.push_back("summary.json");
  output.files.push_back("plot_data.csv");
  return output;
}

std::string emit_plot_data(const std::string& summary_json) {
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(summary_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("plot data: summary is not valid JSON: ") +
                      e.what());
  }
  if (!summary.is_object() || summary.value("schema", "") != kSummarySchema ||
      !summary.contains("experiment") || !summary.contains("replications") ||
      !summary.at("replications").is_array()) {
    throw ConfigError("plot data: not a recognized summary document");
  }
  const std::string experiment = summary.at("experiment").get<std::string>();

  std::string out = "series,replication,functional,x,y\n";
  const nlohmann::json& reps = summary.at("replications");
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const nlohmann::json& rep = reps.at(r);
    if (!rep.is_object()) continue;
    if (experiment == "noise-selftest") {
      plot_row(out, "variance_ratio", r, "",
               number_or_nan(rep.value("samples", nlohmann::json())),
               number_or_nan(rep.value("variance_ratio", nlohmann::json())));
    } else if (experiment == "residual-check") {
      if (rep.contains("eigen")) {
        plot_row(out, "residual_eigen", r, "", 0.0,
                 number_or_nan(rep.at("eigen").value("coarse",
                                                     nlohmann::json())));
        plot_row(out, "residual_eigen", r, "", 1.0,
                 number_or_nan(rep.at("eigen").value("fine",
                                                     nlohmann::json())));
      }
      if (rep.contains("additive")) {
        plot_row(out, "residual_additive_rms", r, "", 0.0,
                 number_or_nan(rep.at("additive").value("coarse_rms",
                                                        nlohmann::json())));
        plot_row(out, "residual_additive_rms", r, "", 1.0,
                 number_or_nan(rep.at("additive").value("fine_rms",
                                                        nlohmann::json())));
      }
    } else if (experiment == "sde-oracle") {
      const double n = number_or_nan(rep.value("paths", nlohmann::json()));
      for (const char* key :
           {"z_mean_vs_exact", "z_second_vs_exact", "z_two_sample", "ks_p",
            "ess", "weighted_mean"}) {
        plot_row(out, key, r, "", n,
                 number_or_nan(rep.value(key, nlohmann::json())));
      }
    } else if (experiment == "simulate") {
      if (rep.contains("functionals") && rep.at("functionals").is_array()) {
        for (const nlohmann::json& fj : rep.at("functionals")) {
          plot_row(out, "mean", r, fj.value("functional", ""),
                   number_or_nan(fj.value("paths", nlohmann::json())),
                   number_or_nan(fj.value("mean", nlohmann::json())));
        }
      }
      if (rep.contains("coverage") && rep.at("coverage").is_array()) {
        const nlohmann::json& cov = rep.at("coverage");
        const nlohmann::json& levels =
            summary.at("config").value("levels", nlohmann::json::array());
        for (std::size_t i = 0; i < cov.size(); ++i) {
          const double lvl = i < levels.size()
                                 ? number_or_nan(levels.at(i))
                                 : static_cast<double>(i);
          plot_row(out, "coverage", r, "", lvl, number_or_nan(cov.at(i)));
        }
      }
    } else if (experiment == "compare-laws") {
      const nlohmann::json& levels =
          summary.at("config").value("levels", nlohmann::json::array());
      for (const char* series : {"coverage_direct", "coverage_weighted"}) {
        if (!rep.contains(series) || !rep.at(series).is_array()) continue;
        const nlohmann::json& cov = rep.at(series);
        for (std::size_t i = 0; i < cov.size(); ++i) {
          const double lvl = i < levels.size()
                                 ? number_or_nan(levels.at(i))
                                 : static_cast<double>(i);
          plot_row(out, series, r, "", lvl, number_or_nan(cov.at(i)));
        }
      }
      if (rep.contains("martingale") && rep.at("martingale").is_array()) {
        for (const nlohmann::json& m : rep.at("martingale")) {
          plot_row(out, "martingale_mean", r, "",
                   number_or_nan(m.value("level", nlohmann::json())),
                   number_or_nan(m.value("mean", nlohmann::json())));
        }
      }
      if (rep.contains("report") && rep.at("report").is_object() &&
          rep.at("report").contains("cells")) {
        for (const nlohmann::json& cell : rep.at("report").at("cells")) {
          if (!cell.value("sufficient", false)) continue;
          const double lvl =
              number_or_nan(cell.value("level", nlohmann::json()));
          const std::string func = cell.value("functional", "");
          for (const char* key :
               {"z", "ks_p", "ess", "direct_mean", "weighted_mean"}) {
            plot_row(out, key, r, func, lvl,
                     number_or_nan(cell.value(key, nlohmann::json())));
          }
        }
      }
    }
  }
  return out;
}

}  // namespace spde
