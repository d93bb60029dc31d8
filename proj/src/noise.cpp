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

#include "noise.hpp"

#include <cmath>

#include "errors.hpp"
#include "rng.hpp"
#include "summation.hpp"

namespace spde {

void sample_noise_row(const Grid& grid, std::uint64_t master_seed,
                      std::uint64_t path_index, std::size_t k,
                      std::span<double> out) {
  if (out.size() != grid.space_cells()) {
    throw ConfigError("noise row buffer size does not match grid nx");
  }
  if (k >= grid.time_steps()) {
    throw ConfigError("noise row index beyond grid nt");
  }
  rng::fill_standard_normal_row(master_seed, path_index, k, out);
  const double sigma = std::sqrt(grid.dt() * grid.dx());
  for (double& v : out) v *= sigma;
}

NoiseField sample_noise(const Grid& grid, std::uint64_t master_seed,
                        std::uint64_t path_index) {
  NoiseField field{grid, master_seed, path_index,
                   std::vector<double>(grid.time_steps() * grid.space_cells())};
  const std::size_t nx = grid.space_cells();
  for (std::size_t k = 0; k < grid.time_steps(); ++k) {
    sample_noise_row(grid, master_seed, path_index, k,
                     {field.increments.data() + k * nx, nx});
  }
  return field;
}

double ito_integral(std::span<const double> f, const NoiseField& noise) {
  if (f.size() != noise.increments.size()) {
    throw ConfigError("ito_integral: integrand shape does not match noise");
  }
  CompensatedSum sum;
  for (std::size_t i = 0; i < f.size(); ++i) sum.add(f[i] * noise.increments[i]);
  return sum.value();
}

double l2_integral(std::span<const double> f, const Grid& grid,
                   std::size_t up_to_step) {
  if (up_to_step > grid.time_steps()) {
    throw ConfigError("l2_integral: up_to_step beyond grid nt");
  }
  const std::size_t cells = up_to_step * grid.space_cells();
  if (f.size() < cells) {
    throw ConfigError("l2_integral: integrand shape does not match grid");
  }
  CompensatedSum sum;
  for (std::size_t i = 0; i < cells; ++i) sum.add(f[i] * f[i]);
  return sum.value() * grid.cell_area();
}

}  // namespace spde
