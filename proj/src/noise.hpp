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
#include <vector>

#include "grid.hpp"

namespace spde {

/// Space-time white-noise cell increments on a grid: increment(k, j) is
/// Gaussian with variance dt*dx, independent across cells, and a pure
/// function of (master_seed, path_index, grid, k, j). Regeneration is
/// bit-exact in any order and on any thread.
struct NoiseField {
  Grid grid;
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
  std::vector<double> increments;  // row-major, nt * nx

  double at(std::size_t k, std::size_t j) const {
    return increments[k * grid.space_cells() + j];
  }
  std::span<const double> row(std::size_t k) const {
    return {increments.data() + k * grid.space_cells(), grid.space_cells()};
  }
};

/// Materializes the full noise field for one path.
NoiseField sample_noise(const Grid& grid, std::uint64_t master_seed,
                        std::uint64_t path_index);

/// Streaming equivalent of sample_noise: writes row k (all nx increments at
/// time index k) into out. sample_noise is defined as the concatenation of
/// these rows, so batch and streaming consumers see identical increments.
void sample_noise_row(const Grid& grid, std::uint64_t master_seed,
                      std::uint64_t path_index, std::size_t k,
                      std::span<double> out);

/// Left-point Riemann-Ito sum Sum_{k,j} f[k][j] * dW[k][j]. f is row-major
/// nt * nx, evaluated at left time points.
double ito_integral(std::span<const double> f, const NoiseField& noise);

/// Discrete squared-integrand quadrature Sum_{k < up_to_step, j} f[k][j]^2
/// * dt * dx. f is row-major nt * nx (rows beyond up_to_step are ignored).
double l2_integral(std::span<const double> f, const Grid& grid,
                   std::size_t up_to_step);

}  // namespace spde
