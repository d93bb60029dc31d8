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

#include "grid.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace spde {

namespace {

// Every Grid instance carries these invariants; downstream code divides by
// dt and dx and uses time indices as RNG stream slots without rechecking.
void check_grid_arguments(double final_time, double length,
                          std::size_t time_steps, std::size_t space_cells) {
  if (!(final_time > 0.0) || !std::isfinite(final_time)) {
    throw ConfigError("grid: final time must be positive and finite, got " +
                      std::to_string(final_time));
  }
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw ConfigError("grid: spatial length must be positive and finite, got " +
                      std::to_string(length));
  }
  if (time_steps < 1 || time_steps > Grid::kMaxSteps) {
    throw ConfigError("grid: time steps must be in [1, " +
                      std::to_string(Grid::kMaxSteps) + "], got " +
                      std::to_string(time_steps));
  }
  if (space_cells < 2 || space_cells > Grid::kMaxSteps) {
    throw ConfigError("grid: space cells must be in [2, " +
                      std::to_string(Grid::kMaxSteps) + "], got " +
                      std::to_string(space_cells));
  }
}

}  // namespace

Grid::Grid(double final_time, double length, std::size_t time_steps,
           std::size_t space_cells)
    : final_time_(final_time),
      length_(length),
      time_steps_(time_steps),
      space_cells_(space_cells),
      dt_(final_time / static_cast<double>(time_steps)),
      dx_(length / static_cast<double>(space_cells)) {
  check_grid_arguments(final_time, length, time_steps, space_cells);
}

std::size_t Grid::nearest_cell(double x) const {
  if (x <= 0.0) return 0;
  if (x >= length_) return space_cells_ - 1;
  // Cell centers sit at (j + 1/2)*dx; round half away from zero so a point
  // equidistant between two centers snaps to the larger index.
  const double j = std::round(x / dx_ - 0.5);
  const auto idx = static_cast<std::size_t>(j < 0.0 ? 0.0 : j);
  return idx >= space_cells_ ? space_cells_ - 1 : idx;
}

Grid make_grid(double final_time, double length, std::size_t time_steps,
               std::size_t space_cells) {
  return Grid(final_time, length, time_steps, space_cells);
}

}  // namespace spde
