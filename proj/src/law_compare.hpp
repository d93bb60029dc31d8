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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ensemble.hpp"

namespace spde {

/// Two-sample statistics comparing the directly drifted ensemble against the
/// reweighted driftless ensemble, restricted per truncation level to the
/// paths whose quadratic-variation clock never leaves the level before the
/// final time. The comparison is distributional: the two arms use disjoint
/// random streams and are never coupled path by path.

struct CompareOptions {
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t report_seed = 0;
  int threads = 0;  // 0 = one per hardware thread
};

struct LevelFunctionalStats {
  double level = 0.0;
  std::string functional;
  bool sufficient = false;  // both restrictions non-empty
  std::size_t n_direct = 0;
  std::size_t n_weighted = 0;
  double coverage_direct = 0.0;
  double coverage_weighted = 0.0;
  double ess = 0.0;  // effective sample size of the restricted weights
  double direct_mean = 0.0;
  double direct_stderr = 0.0;
  double weighted_mean = 0.0;
  double weighted_stderr = 0.0;  // bootstrap
  double z = 0.0;
  double ks_stat = 0.0;
  double ks_p = 1.0;
};

struct TestReport {
  std::vector<double> levels;
  std::vector<std::string> functionals;
  std::vector<LevelFunctionalStats> cells;  // level-major
  std::size_t live_direct = 0;
  std::size_t live_weighted = 0;
  std::size_t bootstrap_resamples = 0;
  std::uint64_t report_seed = 0;

  const LevelFunctionalStats& cell(std::size_t level_index,
                                   std::size_t functional_index) const {
    return cells[level_index * functionals.size() + functional_index];
  }
};

/// Full per-level, per-functional comparison table. Levels whose restriction
/// is empty in either arm are reported with sufficient = false rather than
/// failing the whole table; coverage fields stay valid for them. Levels with
/// identical restriction sets share one computation (the stopped weights
/// coincide on the restriction, so their statistics are literally equal).
TestReport compare_laws(const EnsembleResult& direct,
                        const EnsembleResult& reweighted,
                        const CompareOptions& options = {});

/// Single-level comparison; throws ComputeError when the restriction is
/// empty in either arm (insufficient coverage at that level).
std::vector<LevelFunctionalStats> compare_laws_at_level(
    const EnsembleResult& direct, const EnsembleResult& reweighted,
    std::size_t level_index, const CompareOptions& options = {});

/// sup-norm distance between the two self-normalized weighted empirical
/// CDFs. Weights must be non-negative and finite with a positive total.
double weighted_ks_statistic(std::span<const double> values_a,
                             std::span<const double> weights_a,
                             std::span<const double> values_b,
                             std::span<const double> weights_b);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t resamples = 0;
};

/// Weighted two-sample KS test. The null distribution is simulated by
/// permuting (value, weight) pairs across the two arms while keeping the
/// arm sizes, recomputing the statistic per permutation; the p-value is
/// (1 + #{D* >= D}) / (resamples + 1). Deterministic for a given seed,
/// independent of thread count.
KsResult weighted_ks_test(std::span<const double> values_a,
                          std::span<const double> weights_a,
                          std::span<const double> values_b,
                          std::span<const double> weights_b,
                          std::size_t resamples, std::uint64_t seed,
                          int threads = 0);

struct BootstrapMean {
  double mean = 0.0;
  double stderr_boot = 0.0;
  std::size_t n = 0;
};

/// Self-normalized weighted mean with a bootstrap standard error
/// (resampling paths with replacement). Deterministic for a given seed.
BootstrapMean weighted_mean_bootstrap(std::span<const double> values,
                                      std::span<const double> weights,
                                      std::size_t resamples,
                                      std::uint64_t seed, int threads = 0);

struct MartingaleCheck {
  double mean = 0.0;
  double mean_stderr = 0.0;
  std::size_t paths = 0;
};

/// Sample mean and standard error of exp(stopped log-weight) at one level
/// over all surviving paths, no restriction. The stopped density has unit
/// expectation under the sampling measure, so mean should sit near 1.
MartingaleCheck stopped_weight_mean(const EnsembleResult& ensemble,
                                    std::size_t level_index);

}  // namespace spde
