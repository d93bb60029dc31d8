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
#include <functional>
#include <vector>

#include "girsanov.hpp"

namespace spde {

/// One-dimensional diffusion du = mu(u) dt + sigma(u) dB. This is the
/// closed-form end of the lab: exact Gaussian tilt formulas exist here, so
/// the reweighting machinery is validated against them before it is trusted
/// on the lattice ensembles.
struct SdeSpec {
  std::function<double(double)> mu;
  std::function<double(double)> sigma;
  double u0 = 0.0;
  double final_time = 1.0;
  std::size_t time_steps = 1;
};

struct SdePath {
  std::vector<double> u;           // size nt+1, u[0] = u0
  std::vector<double> increments;  // size nt, the dB ~ N(0, dt) actually used
  double dt = 0.0;
};

/// Euler-Maruyama rollout u_{k+1} = u_k + mu(u_k) dt + sigma(u_k) dB_k.
/// Deterministic in (master_seed, path_index); the path's draws are the
/// normal stream of slot 0 of its index, so they never collide with another
/// path's. Throws PathBlowUpError when the state leaves the finite range.
SdePath simulate_sde(const SdeSpec& spec, std::uint64_t master_seed,
                     std::uint64_t path_index);

/// Log-density of the drift tilt along a 1-d path, same running conventions
/// as accumulate_weights: per step, log += R(u_k) dB_k - 0.5 R(u_k)^2 dt and
/// r2_accum += R(u_k)^2 dt.
WeightTrajectory girsanov_weight_1d(const SdePath& path,
                                    const std::function<double(double)>& ratio);

/// Moments of the tilted terminal value when the base is standard Brownian
/// motion from 0 and R = mu is constant: the reweighted law of B_T is
/// N(mu*T, T). order 1 -> mu*T, order 2 -> T + mu^2 T^2.
double analytic_tilt_moments(double mu, double final_time, int order);

}  // namespace spde
