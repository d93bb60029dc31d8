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

#include <cstddef>
#include <cstdint>

namespace spde {

/// Uniform space-time lattice over [0,T] x [0,L].
///
/// Time nodes sit at t_k = k*dt for k = 0..nt; space is divided into nx
/// cells of width dx with cell centers x_j = (j + 1/2)*dx. One noise cell
/// pairs with one solution cell, which keeps no-flux (Neumann) boundary
/// rows in natural finite-volume form.
class Grid {
 public:
  /// Largest accepted step counts. Time indices serve as RNG stream slots
  /// and must stay far below the 40-bit counter field reserved for them.
  static constexpr std::size_t kMaxSteps = std::size_t{1} << 20;

  Grid(double final_time, double length, std::size_t time_steps,
       std::size_t space_cells);

  double final_time() const { return final_time_; }
  double length() const { return length_; }
  std::size_t time_steps() const { return time_steps_; }
  std::size_t space_cells() const { return space_cells_; }
  double dt() const { return dt_; }
  double dx() const { return dx_; }
  /// Area of one lattice cell, dt*dx: the variance of one noise increment.
  double cell_area() const { return dt_ * dx_; }

  double time_at(std::size_t k) const { return static_cast<double>(k) * dt_; }
  double cell_center(std::size_t j) const {
    return (static_cast<double>(j) + 0.5) * dx_;
  }

  /// Index of the cell whose center is nearest to x; ties round toward the
  /// larger index. x is clamped into [0, L].
  std::size_t nearest_cell(double x) const;

  bool operator==(const Grid&) const = default;

 private:
  double final_time_;
  double length_;
  std::size_t time_steps_;
  std::size_t space_cells_;
  double dt_;
  double dx_;
};

Grid make_grid(double final_time, double length, std::size_t time_steps,
               std::size_t space_cells);

}  // namespace spde
