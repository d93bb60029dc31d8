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
#include <optional>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "ensemble.hpp"
#include "grid.hpp"

namespace spde {

enum class ExperimentKind {
  kNoiseSelfTest,
  kResidualCheck,
  kSdeOracle,
  kSimulate,
  kCompareLaws,
};

std::string experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(const std::string& name);

/// Coefficient block of a run configuration. Which keys are accepted
/// depends on the preset; the unused fields keep their defaults so that
/// serialize/parse round-trips compare equal.
struct CoefficientConfig {
  std::string preset = "allen_cahn";
  double C = 1.0;              // allen_cahn, linear_diffusion
  double gamma = 0.5;          // allen_cahn
  bool allow_low_gamma = false;  // allen_cahn: accept gamma in [0, 1/2)
  double a = 1.0;              // constant
  double b = 0.0;              // constant
  double d = 1.0;              // constant
  double slope_d = 1.0;        // linear_diffusion
  double h = 0.5;              // constant initial profile (all presets)

  bool operator==(const CoefficientConfig&) const = default;
};

/// One experiment run, fully specified. Every field has a documented
/// default and is echoed into serialized output, so a stored config is
/// self-describing.
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::kSimulate;
  double final_time = 0.1;
  double length = 1.0;
  std::size_t time_steps = 1000;
  std::size_t space_cells = 32;
  BoundaryKind boundary = BoundaryKind::kNeumann;
  CoefficientConfig coefficients;
  std::size_t paths = 10000;
  std::uint64_t master_seed = 12345;
  std::vector<double> levels = {1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
  std::vector<FunctionalSpec> functionals;  // defaulted in parse/normalize
  std::size_t bootstrap_resamples = 1000;
  std::size_t seed_replications = 1;
  int threads = 0;
  std::string out_dir = "out";
  bool export_paths = false;
  std::optional<double> clamp_bound;
  double sde_mu = 0.5;  // drift of the one-dimensional oracle process

  bool operator==(const RunConfig&) const = default;
};

/// The default functional battery: point value at L/2, spatial mean,
/// spatial max, and L2 norm.
std::vector<FunctionalSpec> default_functionals(double length);

/// Parses a JSON run configuration. Fails with a ConfigError naming the
/// offending key on unknown keys, type mismatches, and constraint
/// violations; a config that parses is ready to run.
RunConfig parse_config(const std::string& text);

/// Canonical JSON form with every field populated.
/// parse_config(serialize_config(c)) == c for any valid c.
std::string serialize_config(const RunConfig& config);

Grid make_grid(const RunConfig& config);
CoefficientSet make_coefficients(const RunConfig& config);
SchemeConfig make_scheme(const RunConfig& config);

/// Ensemble settings for one arm; the caller picks the arm's seed (the two
/// arms of a comparison must use disjoint streams).
EnsembleConfig make_ensemble_config(const RunConfig& config,
                                    std::uint64_t arm_seed);

}  // namespace spde
