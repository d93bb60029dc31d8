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

#include "law_compare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "errors.hpp"
#include "girsanov.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "summation.hpp"

namespace spde {

namespace {

constexpr std::uint64_t kPurposeBootstrap = 0x100000;
constexpr std::uint64_t kPurposeKs = 0x200000;

void validate_weighted_sample(std::span<const double> values,
                              std::span<const double> weights,
                              const char* arm) {
  if (values.empty() || values.size() != weights.size()) {
    throw ConfigError(std::string("weighted sample (") + arm +
                      "): values and weights must be non-empty and equal "
                      "in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ComputeError(std::string("weighted sample (") + arm +
                         "): non-finite value");
    }
    if (!std::isfinite(weights[i]) || !(weights[i] >= 0.0)) {
      throw ComputeError(std::string("weighted sample (") + arm +
                         "): weights must be finite and non-negative");
    }
    total += weights[i];
  }
  if (!(total > 0.0)) {
    throw ComputeError(std::string("weighted sample (") + arm +
                       "): degenerate, total weight is zero");
  }
}

/// Pooled two-sample data, sorted by value once so permutation replicates
/// only reassign labels.
struct PooledSample {
  std::vector<double> values;       // ascending
  std::vector<double> weights;      // aligned with values
  std::vector<std::uint8_t> arm_a;  // original labels, aligned
  double total_a = 0.0;
  double total_b = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

PooledSample build_pooled(std::span<const double> values_a,
                          std::span<const double> weights_a,
                          std::span<const double> values_b,
                          std::span<const double> weights_b) {
  validate_weighted_sample(values_a, weights_a, "first arm");
  validate_weighted_sample(values_b, weights_b, "second arm");
  const std::size_t na = values_a.size();
  const std::size_t nb = values_b.size();
  const std::size_t n = na + nb;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto value_of = [&](std::size_t i) {
    return i < na ? values_a[i] : values_b[i - na];
  };
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const double vi = value_of(i);
    const double vj = value_of(j);
    return vi != vj ? vi < vj : i < j;
  });

  PooledSample pooled;
  pooled.values.resize(n);
  pooled.weights.resize(n);
  pooled.arm_a.resize(n);
  pooled.n_a = na;
  pooled.n_b = nb;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    pooled.values[k] = value_of(i);
    if (i < na) {
      pooled.weights[k] = weights_a[i];
      pooled.arm_a[k] = 1;
      pooled.total_a += weights_a[i];
    } else {
      pooled.weights[k] = weights_b[i - na];
      pooled.arm_a[k] = 0;
      pooled.total_b += weights_b[i - na];
    }
  }
  return pooled;
}

/// sup |F_a - F_b| over the pooled support; ties are resolved by evaluating
/// only after every pair sharing a value has been consumed.
double sweep_distance(const std::vector<double>& values,
                      const std::vector<double>& weights,
                      const std::vector<std::uint8_t>& arm_a, double total_a,
                      double total_b) {
  const double inv_a = 1.0 / total_a;
  const double inv_b = 1.0 / total_b;
  double fa = 0.0;
  double fb = 0.0;
  double d = 0.0;
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (arm_a[i]) {
      fa += weights[i] * inv_a;
    } else {
      fb += weights[i] * inv_b;
    }
    if (i + 1 == n || values[i + 1] != values[i]) {
      d = std::max(d, std::abs(fa - fb));
    }
  }
  return d;
}

std::vector<std::size_t> live_indices(const EnsembleResult& e) {
  std::vector<std::size_t> idx;
  idx.reserve(e.paths());
  for (std::size_t p = 0; p < e.paths(); ++p) {
    if (e.blow_up[p] == 0) idx.push_back(p);
  }
  return idx;
}

void validate_pair(const EnsembleResult& direct,
                   const EnsembleResult& reweighted) {
  if (direct.weighted) {
    throw ConfigError(
        "compare_laws: first ensemble must be the unweighted drifted arm");
  }
  if (!reweighted.weighted) {
    throw ConfigError(
        "compare_laws: second ensemble must be the reweighted arm");
  }
  const Grid& g1 = direct.grid;
  const Grid& g2 = reweighted.grid;
  if (g1.time_steps() != g2.time_steps() ||
      g1.space_cells() != g2.space_cells() ||
      g1.final_time() != g2.final_time() || g1.length() != g2.length()) {
    throw ConfigError("compare_laws: the two arms use different grids");
  }
  if (direct.boundary != reweighted.boundary) {
    throw ConfigError(
        "compare_laws: the two arms use different boundary conditions");
  }
  if (direct.functionals.size() != reweighted.functionals.size()) {
    throw ConfigError("compare_laws: functional batteries differ in size");
  }
  for (std::size_t f = 0; f < direct.functionals.size(); ++f) {
    if (direct.functionals[f].name() != reweighted.functionals[f].name()) {
      throw ConfigError("compare_laws: functional " + std::to_string(f) +
                        " differs between arms (" +
                        direct.functionals[f].name() + " vs " +
                        reweighted.functionals[f].name() + ")");
    }
  }
  if (direct.levels.size() != reweighted.levels.size() ||
      !std::equal(direct.levels.begin(), direct.levels.end(),
                  reweighted.levels.begin())) {
    throw ConfigError("compare_laws: truncation levels differ between arms");
  }
}

std::vector<std::size_t> restrict_to_level(const EnsembleResult& e,
                                           const std::vector<std::size_t>& live,
                                           std::size_t lvl) {
  std::vector<std::size_t> idx;
  idx.reserve(live.size());
  for (std::size_t p : live) {
    if (e.tau_flag(p, lvl)) idx.push_back(p);
  }
  return idx;
}

/// Statistics for one truncation level. Insufficient restrictions produce
/// flagged cells with NaN statistics instead of throwing; the single-level
/// entry point converts that into an error.
std::vector<LevelFunctionalStats> compute_level_cells(
    const EnsembleResult& direct, const EnsembleResult& reweighted,
    std::size_t lvl, const std::vector<std::size_t>& dir_idx,
    const std::vector<std::size_t>& wt_idx, std::size_t live_direct,
    std::size_t live_weighted, const CompareOptions& options) {
  const std::size_t n_funcs = direct.functionals.size();
  const double level = direct.levels[lvl];
  const double qnan = std::numeric_limits<double>::quiet_NaN();

  std::vector<LevelFunctionalStats> cells(n_funcs);
  for (std::size_t f = 0; f < n_funcs; ++f) {
    LevelFunctionalStats& c = cells[f];
    c.level = level;
    c.functional = direct.functionals[f].name();
    c.n_direct = dir_idx.size();
    c.n_weighted = wt_idx.size();
    c.coverage_direct = static_cast<double>(dir_idx.size()) /
                        static_cast<double>(live_direct);
    c.coverage_weighted = static_cast<double>(wt_idx.size()) /
                          static_cast<double>(live_weighted);
  }
  if (dir_idx.empty() || wt_idx.empty()) {
    for (LevelFunctionalStats& c : cells) {
      c.sufficient = false;
      c.ess = qnan;
      c.direct_mean = qnan;
      c.direct_stderr = qnan;
      c.weighted_mean = qnan;
      c.weighted_stderr = qnan;
      c.z = qnan;
      c.ks_stat = qnan;
      c.ks_p = qnan;
    }
    return cells;
  }

  // Stopped log-weights on the restriction; shift by the maximum for a
  // stable exponential, then rescale to mean one so the direct arm's unit
  // weights and the reweighted arm's weights live on one scale when pooled.
  std::vector<double> logs(wt_idx.size());
  for (std::size_t i = 0; i < wt_idx.size(); ++i) {
    logs[i] = reweighted.stopped_log(wt_idx[i], lvl);
  }
  const double ess = effective_sample_size(logs);
  const double max_log = *std::max_element(logs.begin(), logs.end());
  std::vector<double> weights(logs.size());
  CompensatedSum weight_sum;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    weights[i] = std::exp(logs[i] - max_log);
    weight_sum.add(weights[i]);
  }
  const double rescale =
      static_cast<double>(weights.size()) / weight_sum.value();
  for (double& w : weights) w *= rescale;

  const std::vector<double> unit(dir_idx.size(), 1.0);
  std::vector<double> xd(dir_idx.size());
  std::vector<double> xw(wt_idx.size());

  for (std::size_t f = 0; f < n_funcs; ++f) {
    LevelFunctionalStats& c = cells[f];
    c.sufficient = true;
    c.ess = ess;
    for (std::size_t i = 0; i < dir_idx.size(); ++i) {
      xd[i] = direct.value(dir_idx[i], f);
    }
    for (std::size_t i = 0; i < wt_idx.size(); ++i) {
      xw[i] = reweighted.value(wt_idx[i], f);
    }

    CompensatedSum dsum;
    for (double v : xd) dsum.add(v);
    const double dmean = dsum.value() / static_cast<double>(xd.size());
    double dse = 0.0;
    if (xd.size() >= 2) {
      CompensatedSum sq;
      for (double v : xd) sq.add((v - dmean) * (v - dmean));
      const double var = sq.value() / static_cast<double>(xd.size() - 1);
      dse = std::sqrt(var / static_cast<double>(xd.size()));
    }
    c.direct_mean = dmean;
    c.direct_stderr = dse;

    const BootstrapMean bm = weighted_mean_bootstrap(
        xw, weights, options.bootstrap_resamples,
        rng::derive_seed(options.report_seed,
                         kPurposeBootstrap + lvl * 64 + f),
        options.threads);
    c.weighted_mean = bm.mean;
    c.weighted_stderr = bm.stderr_boot;

    const double diff = dmean - bm.mean;
    const double denom = std::sqrt(dse * dse +
                                   bm.stderr_boot * bm.stderr_boot);
    c.z = diff == 0.0 ? 0.0
                      : (denom > 0.0 ? diff / denom
                                     : std::copysign(
                                           std::numeric_limits<double>::
                                               infinity(),
                                           diff));

    const KsResult ks = weighted_ks_test(
        xd, unit, xw, weights, options.bootstrap_resamples,
        rng::derive_seed(options.report_seed, kPurposeKs + lvl * 64 + f),
        options.threads);
    c.ks_stat = ks.statistic;
    c.ks_p = ks.p_value;
  }
  return cells;
}

}  // namespace

double weighted_ks_statistic(std::span<const double> values_a,
                             std::span<const double> weights_a,
                             std::span<const double> values_b,
                             std::span<const double> weights_b) {
  const PooledSample pooled =
      build_pooled(values_a, weights_a, values_b, weights_b);
  return sweep_distance(pooled.values, pooled.weights, pooled.arm_a,
                        pooled.total_a, pooled.total_b);
}

KsResult weighted_ks_test(std::span<const double> values_a,
                          std::span<const double> weights_a,
                          std::span<const double> values_b,
                          std::span<const double> weights_b,
                          std::size_t resamples, std::uint64_t seed,
                          int threads) {
  if (resamples < 1) {
    throw ConfigError("weighted_ks_test: at least 1 resample required");
  }
  const PooledSample pooled =
      build_pooled(values_a, weights_a, values_b, weights_b);
  const double d_obs = sweep_distance(pooled.values, pooled.weights,
                                      pooled.arm_a, pooled.total_a,
                                      pooled.total_b);

  const std::size_t n = pooled.values.size();
  const std::size_t na = pooled.n_a;
  const double total = pooled.total_a + pooled.total_b;
  std::vector<double> d_star(resamples);

  // Each replicate reassigns arm labels by a partial Fisher-Yates draw of
  // the first-arm positions, seeded per replicate: the value is a pure
  // function of (seed, b), so scheduling cannot change the result.
  parallel_for_index(resamples, threads, [&](std::size_t b) {
    rng::DrawStream rs(seed, /*stream=*/b, /*slot=*/0);
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::vector<std::uint8_t> label(n, 0);
    double ta = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rs.next_u64() % (n - i));
      std::swap(idx[i], idx[j]);
      ta += pooled.weights[idx[i]];
      label[idx[i]] = 1;
    }
    const double tb = total - ta;
    if (!(ta > 0.0) || !(tb > 0.0)) {
      // A replicate arm drew only zero weights; score it as maximal so it
      // can only make the p-value more conservative.
      d_star[b] = 1.0;
      return;
    }
    d_star[b] = sweep_distance(pooled.values, pooled.weights, label, ta, tb);
  });

  std::size_t at_least = 0;
  for (double d : d_star) {
    if (d >= d_obs) ++at_least;
  }
  KsResult result;
  result.statistic = d_obs;
  result.p_value = (1.0 + static_cast<double>(at_least)) /
                   (static_cast<double>(resamples) + 1.0);
  result.resamples = resamples;
  return result;
}

BootstrapMean weighted_mean_bootstrap(std::span<const double> values,
                                      std::span<const double> weights,
                                      std::size_t resamples,
                                      std::uint64_t seed, int threads) {
  if (resamples < 2) {
    throw ConfigError(
        "weighted_mean_bootstrap: at least 2 resamples required");
  }
  validate_weighted_sample(values, weights, "bootstrap sample");
  const std::size_t n = values.size();

  CompensatedSum sw;
  CompensatedSum swx;
  for (std::size_t i = 0; i < n; ++i) {
    sw.add(weights[i]);
    swx.add(weights[i] * values[i]);
  }
  const double mean = swx.value() / sw.value();

  std::vector<double> boot_means(resamples);
  parallel_for_index(resamples, threads, [&](std::size_t b) {
    rng::DrawStream rs(seed, /*stream=*/b, /*slot=*/0);
    double bw = 0.0;
    double bwx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = static_cast<std::size_t>(rs.next_u64() % n);
      bw += weights[j];
      bwx += weights[j] * values[j];
    }
    // A replicate that drew only zero weights adds nothing to the spread.
    boot_means[b] = bw > 0.0 ? bwx / bw : mean;
  });

  CompensatedSum avg_sum;
  for (double m : boot_means) avg_sum.add(m);
  const double avg = avg_sum.value() / static_cast<double>(resamples);
  CompensatedSum sq;
  for (double m : boot_means) sq.add((m - avg) * (m - avg));
  const double var = sq.value() / static_cast<double>(resamples - 1);

  BootstrapMean result;
  result.mean = mean;
  result.stderr_boot = std::sqrt(var);
  result.n = n;
  return result;
}

TestReport compare_laws(const EnsembleResult& direct,
                        const EnsembleResult& reweighted,
                        const CompareOptions& options) {
  validate_pair(direct, reweighted);
  const std::vector<std::size_t> live_d = live_indices(direct);
  const std::vector<std::size_t> live_w = live_indices(reweighted);
  if (live_d.empty() || live_w.empty()) {
    throw ComputeError("compare_laws: an arm has no surviving paths");
  }

  TestReport report;
  report.levels.assign(direct.levels.begin(), direct.levels.end());
  for (const FunctionalSpec& f : direct.functionals) {
    report.functionals.push_back(f.name());
  }
  report.live_direct = live_d.size();
  report.live_weighted = live_w.size();
  report.bootstrap_resamples = options.bootstrap_resamples;
  report.report_seed = options.report_seed;

  std::vector<std::size_t> prev_dir;
  std::vector<std::size_t> prev_wt;
  std::vector<LevelFunctionalStats> prev_cells;
  for (std::size_t lvl = 0; lvl < report.levels.size(); ++lvl) {
    std::vector<std::size_t> dir_idx = restrict_to_level(direct, live_d, lvl);
    std::vector<std::size_t> wt_idx =
        restrict_to_level(reweighted, live_w, lvl);
    std::vector<LevelFunctionalStats> cells;
    if (lvl > 0 && dir_idx == prev_dir && wt_idx == prev_wt) {
      // Identical restrictions mean identical stopped weights, so the
      // statistics carry over verbatim; only the level label changes.
      cells = prev_cells;
      for (LevelFunctionalStats& c : cells) c.level = report.levels[lvl];
    } else {
      cells = compute_level_cells(direct, reweighted, lvl, dir_idx, wt_idx,
                                  live_d.size(), live_w.size(), options);
    }
    prev_dir = std::move(dir_idx);
    prev_wt = std::move(wt_idx);
    prev_cells = cells;
    for (LevelFunctionalStats& c : cells) {
      report.cells.push_back(std::move(c));
    }
  }
  return report;
}

std::vector<LevelFunctionalStats> compare_laws_at_level(
    const EnsembleResult& direct, const EnsembleResult& reweighted,
    std::size_t level_index, const CompareOptions& options) {
  validate_pair(direct, reweighted);
  if (level_index >= direct.levels.size()) {
    throw ConfigError("compare_laws_at_level: level index out of range");
  }
  const std::vector<std::size_t> live_d = live_indices(direct);
  const std::vector<std::size_t> live_w = live_indices(reweighted);
  if (live_d.empty() || live_w.empty()) {
    throw ComputeError("compare_laws: an arm has no surviving paths");
  }
  const std::vector<std::size_t> dir_idx =
      restrict_to_level(direct, live_d, level_index);
  const std::vector<std::size_t> wt_idx =
      restrict_to_level(reweighted, live_w, level_index);
  if (dir_idx.empty() || wt_idx.empty()) {
    throw ComputeError(
        "compare_laws: insufficient coverage at level " +
        std::to_string(direct.levels[level_index]) + "; the " +
        (dir_idx.empty() ? "direct" : "reweighted") +
        " arm has no paths whose clock stayed within the level");
  }
  return compute_level_cells(direct, reweighted, level_index, dir_idx,
                             wt_idx, live_d.size(), live_w.size(), options);
}

MartingaleCheck stopped_weight_mean(const EnsembleResult& ensemble,
                                    std::size_t level_index) {
  if (level_index >= ensemble.levels.size()) {
    throw ConfigError("stopped_weight_mean: level index out of range");
  }
  std::vector<double> w;
  w.reserve(ensemble.paths());
  for (std::size_t p = 0; p < ensemble.paths(); ++p) {
    if (ensemble.blow_up[p] != 0) continue;
    const double value = std::exp(ensemble.stopped_log(p, level_index));
    if (!std::isfinite(value)) {
      throw ComputeError(
          "stopped_weight_mean: stopped weight overflowed to a non-finite "
          "value");
    }
    w.push_back(value);
  }
  if (w.size() < 2) {
    throw ComputeError(
        "stopped_weight_mean: need at least 2 surviving paths");
  }
  CompensatedSum sum;
  for (double v : w) sum.add(v);
  const double mean = sum.value() / static_cast<double>(w.size());
  CompensatedSum sq;
  for (double v : w) sq.add((v - mean) * (v - mean));
  const double var = sq.value() / static_cast<double>(w.size() - 1);

  MartingaleCheck check;
  check.mean = mean;
  check.mean_stderr = std::sqrt(var / static_cast<double>(w.size()));
  check.paths = w.size();
  return check;
}

}  // namespace spde
