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

#include "sde.hpp"

#include <cmath>

#include "errors.hpp"
#include "rng.hpp"

namespace spde {

SdePath simulate_sde(const SdeSpec& spec, std::uint64_t master_seed,
                     std::uint64_t path_index) {
  if (!spec.mu || !spec.sigma) {
    throw ConfigError("simulate_sde: mu and sigma must both be set");
  }
  if (!(spec.final_time > 0.0) || !std::isfinite(spec.final_time)) {
    throw ConfigError("simulate_sde: final_time must be positive and finite");
  }
  if (spec.time_steps < 1) {
    throw ConfigError("simulate_sde: time_steps must be at least 1");
  }
  if (!std::isfinite(spec.u0)) {
    throw ConfigError("simulate_sde: u0 must be finite");
  }
  const std::size_t nt = spec.time_steps;
  const double dt = spec.final_time / static_cast<double>(nt);
  const double root_dt = std::sqrt(dt);

  SdePath path;
  path.dt = dt;
  path.u.resize(nt + 1);
  path.increments.resize(nt);
  rng::fill_standard_normal_row(master_seed, path_index, /*slot=*/0,
                                path.increments);
  for (double& v : path.increments) v *= root_dt;

  double u = spec.u0;
  path.u[0] = u;
  for (std::size_t k = 0; k < nt; ++k) {
    u = u + spec.mu(u) * dt + spec.sigma(u) * path.increments[k];
    if (!std::isfinite(u)) {
      throw PathBlowUpError(k + 1, 0);
    }
    path.u[k + 1] = u;
  }
  return path;
}

WeightTrajectory girsanov_weight_1d(
    const SdePath& path, const std::function<double(double)>& ratio) {
  if (!ratio) {
    throw ConfigError("girsanov_weight_1d: ratio must be set");
  }
  const std::size_t nt = path.increments.size();
  WeightTrajectory w;
  w.log_xi.resize(nt + 1);
  w.r2_accum.resize(nt + 1);
  w.log_xi[0] = 0.0;
  w.r2_accum[0] = 0.0;

  double log_acc = 0.0;
  double r2_acc = 0.0;
  for (std::size_t k = 0; k < nt; ++k) {
    const double r = ratio(path.u[k]);
    log_acc += r * path.increments[k] - 0.5 * r * r * path.dt;
    r2_acc += r * r * path.dt;
    if (!std::isfinite(log_acc) || !std::isfinite(r2_acc)) {
      throw WeightOverflowError(k + 1);
    }
    w.log_xi[k + 1] = log_acc;
    w.r2_accum[k + 1] = r2_acc;
  }
  return w;
}

double analytic_tilt_moments(double mu, double final_time, int order) {
  if (!std::isfinite(mu) || !(final_time > 0.0) ||
      !std::isfinite(final_time)) {
    throw ConfigError("analytic_tilt_moments: mu finite, final_time > 0");
  }
  switch (order) {
    case 1:
      return mu * final_time;
    case 2:
      return final_time + mu * mu * final_time * final_time;
    default:
      throw ConfigError("analytic_tilt_moments: order must be 1 or 2");
  }
}

}  // namespace spde
