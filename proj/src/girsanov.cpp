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

#include "girsanov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"
#include "summation.hpp"

namespace spde {

namespace {

// exp(r2/2) stays finite for doubles up to r2 ~ 1418.6.
constexpr double kOverflowR2 = 1418.0;

}  // namespace

std::size_t WeightTrajectory::tau_index(double level) const {
  // r2_accum is nondecreasing, so the first crossing is a lower bound.
  const auto it =
      std::lower_bound(r2_accum.begin(), r2_accum.end(), level);
  if (it == r2_accum.end()) return r2_accum.size() - 1;
  return static_cast<std::size_t>(it - r2_accum.begin());
}

WeightTrajectory accumulate_weights(const PathField& path,
                                    const NoiseField& noise,
                                    const CoefficientSet& coeffs,
                                    TiltDirection direction) {
  const Grid& grid = path.grid;
  if (!(noise.grid == grid)) {
    throw ConfigError("accumulate_weights: noise grid does not match path");
  }
  const std::size_t n = grid.space_cells();
  const std::size_t nt = grid.time_steps();
  const double area = grid.cell_area();
  const double sign = direction == TiltDirection::kAddDrift ? 1.0 : -1.0;

  WeightTrajectory w;
  w.log_xi.resize(nt + 1);
  w.r2_accum.resize(nt + 1);
  w.log_xi[0] = 0.0;
  w.r2_accum[0] = 0.0;

  double log_acc = 0.0;
  double r2_acc = 0.0;
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = grid.time_at(k);
    const std::span<const double> row = noise.row(k);
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double ratio = coeffs.ratio(t, grid.cell_center(j), path.at(k, j));
      s1 += ratio * row[j];
      s2 += ratio * ratio;
    }
    log_acc += sign * s1 - 0.5 * area * s2;
    r2_acc += area * s2;
    if (!std::isfinite(log_acc) || !std::isfinite(r2_acc)) {
      throw WeightOverflowError(k + 1);
    }
    w.log_xi[k + 1] = log_acc;
    w.r2_accum[k + 1] = r2_acc;
  }
  return w;
}

NoiseField shifted_noise(const NoiseField& noise, const PathField& path,
                         const CoefficientSet& coeffs, double scale) {
  const Grid& grid = path.grid;
  if (!(noise.grid == grid)) {
    throw ConfigError("shifted_noise: noise grid does not match path");
  }
  const std::size_t n = grid.space_cells();
  const std::size_t nt = grid.time_steps();
  const double area = grid.cell_area();

  NoiseField out = noise;
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = grid.time_at(k);
    double* row = out.increments.data() + k * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double ratio = coeffs.ratio(t, grid.cell_center(j), path.at(k, j));
      row[j] = std::fma(scale * ratio, area, row[j]);
    }
  }
  return out;
}

double effective_sample_size(std::span<const double> log_weights) {
  if (log_weights.empty()) {
    throw ComputeError("effective_sample_size: no weights");
  }
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
      throw ComputeError("effective_sample_size: non-finite log-weight");
    }
    max_lw = std::max(max_lw, lw);
  }
  if (!std::isfinite(max_lw)) {
    throw ComputeError(
        "effective_sample_size: all weights are zero, the weighted ensemble "
        "is degenerate");
  }
  CompensatedSum sum;
  CompensatedSum sum_sq;
  for (double lw : log_weights) {
    const double v = std::exp(lw - max_lw);
    sum.add(v);
    sum_sq.add(v * v);
  }
  return sum.value() * sum.value() / sum_sq.value();
}

NovikovEstimate novikov_estimate(std::span<const double> r2_terminal) {
  NovikovEstimate out;
  if (r2_terminal.empty()) {
    throw ComputeError("novikov_estimate: no samples");
  }
  CompensatedSum sum;
  std::size_t overflowed = 0;
  for (double r2 : r2_terminal) {
    if (!(r2 >= 0.0)) {
      throw ComputeError("novikov_estimate: negative or NaN quadratic "
                         "variation " +
                         std::to_string(r2));
    }
    if (r2 > kOverflowR2) {
      ++overflowed;
      continue;
    }
    sum.add(std::exp(0.5 * r2));
  }
  out.retained = r2_terminal.size() - overflowed;
  out.fraction_overflowed =
      static_cast<double>(overflowed) / static_cast<double>(r2_terminal.size());
  out.estimate = out.retained == 0
                     ? std::numeric_limits<double>::quiet_NaN()
                     : sum.value() / static_cast<double>(out.retained);
  return out;
}

}  // namespace spde
