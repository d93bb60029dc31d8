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

#include "coefficients.hpp"
#include "girsanov.hpp"
#include "grid.hpp"
#include "heat_solver.hpp"

namespace spde {

/// A scalar summary of the terminal state u(T, .) of one path.
struct FunctionalSpec {
  enum class Kind { kPointValue, kSpatialMean, kSpatialMax, kL2Norm };
  Kind kind = Kind::kSpatialMean;
  double x0 = 0.0;  // kPointValue only; snaps to the nearest cell center

  std::string name() const;
  bool operator==(const FunctionalSpec&) const = default;
};

/// Evaluates one functional on a terminal state row (size nx).
double evaluate_functional(const FunctionalSpec& spec,
                           std::span<const double> final_row,
                           const Grid& grid);
double evaluate_functional(const FunctionalSpec& spec, const PathField& path);

struct EnsembleConfig {
  Grid grid;
  BoundaryKind boundary = BoundaryKind::kNeumann;
  SchemeConfig scheme;
  std::vector<FunctionalSpec> functionals;
  std::vector<double> levels;  // truncation levels, strictly increasing, > 0
  std::size_t paths = 0;       // >= 2
  std::uint64_t master_seed = 0;  // noise key for this arm
  int threads = 0;                // 0 = hardware concurrency
};

/// Columnar per-path records of one simulation arm. Every requested path
/// has a row; paths that blew up (or whose weights degenerated) are flagged,
/// hold NaN in the double columns, and are excluded from statistics.
struct EnsembleResult {
  Grid grid;
  BoundaryKind boundary = BoundaryKind::kNeumann;
  std::string preset_name;
  std::uint64_t master_seed = 0;
  bool weighted = false;  // reweighted arm (log-weight columns meaningful)
  std::vector<FunctionalSpec> functionals;
  std::vector<double> levels;

  std::vector<std::uint8_t> blow_up;       // size paths
  std::vector<double> values;              // paths x functionals, row-major
  std::vector<double> log_weight;          // terminal log-density; 0 direct
  std::vector<double> r2_terminal;         // terminal quadratic variation
  std::vector<double> stopped_log_weight;  // paths x levels; 0 direct
  std::vector<std::uint8_t> tau_at_end;    // paths x levels
  std::size_t blow_up_count = 0;

  std::size_t paths() const { return blow_up.size(); }
  std::size_t n_functionals() const { return functionals.size(); }
  std::size_t n_levels() const { return levels.size(); }
  double value(std::size_t p, std::size_t f) const {
    return values[p * functionals.size() + f];
  }
  double stopped_log(std::size_t p, std::size_t lvl) const {
    return stopped_log_weight[p * levels.size() + lvl];
  }
  bool tau_flag(std::size_t p, std::size_t lvl) const {
    return tau_at_end[p * levels.size() + lvl] != 0;
  }
};

/// Simulates `paths` independent solutions with the full drift b + d under
/// their own law. Records carry unit weights; the stopping-time flags are
/// still computed, by accumulating R along the drifted paths. Throws
/// ComputeError when more than 20% of paths blow up (grid too coarse).
EnsembleResult run_direct(const CoefficientSet& coeffs,
                          const EnsembleConfig& config);

/// Simulates driftless paths (drift b only) and accumulates the
/// change-of-measure log-density toward the b + d law, with stopped values
/// recorded for every configured level.
EnsembleResult run_reweighted(const CoefficientSet& coeffs,
                              const EnsembleConfig& config);

/// Fraction of non-blown-up paths with tau_n = T, per level. Non-decreasing
/// in the level by construction of the stopping times.
std::vector<double> tau_coverage(const EnsembleResult& ensemble);

}  // namespace spde
