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

#include "heat_solver.hpp"

#include <cmath>
#include <numbers>

#include "errors.hpp"
#include "summation.hpp"

namespace spde {

namespace {

double boundary_diag(BoundaryKind boundary, double r) {
  // Mirrored-flux rows lose one neighbor coupling; absorbing rows keep the
  // full 2r because the ghost value is pinned at zero.
  return boundary == BoundaryKind::kNeumann ? 1.0 + r : 1.0 + 2.0 * r;
}

}  // namespace

ImplicitHeatOperator::ImplicitHeatOperator(const Grid& grid,
                                           BoundaryKind boundary) {
  const std::size_t n = grid.space_cells();
  const double r = grid.dt() / (grid.dx() * grid.dx());
  p_.resize(n);
  rp_.resize(n);

  // Thomas factorization of the constant tridiagonal
  // [-r, diag_j, -r]; pivots are >= 1, so the factorization never breaks.
  double pivot = boundary_diag(boundary, r);
  p_[0] = 1.0 / pivot;
  rp_[0] = r * p_[0];
  for (std::size_t j = 1; j < n; ++j) {
    const double diag =
        (j + 1 == n) ? boundary_diag(boundary, r) : 1.0 + 2.0 * r;
    pivot = std::fma(-r, rp_[j - 1], diag);
    p_[j] = 1.0 / pivot;
    rp_[j] = r * p_[j];
  }
}

void ImplicitHeatOperator::solve_in_place(std::span<double> values) const {
  const std::size_t n = p_.size();
  if (values.size() != n) {
    throw ConfigError("tridiagonal solve: state has " +
                      std::to_string(values.size()) + " cells, operator has " +
                      std::to_string(n));
  }
  // Forward elimination overwrites values with y, back substitution with x.
  for (std::size_t j = 1; j < n; ++j) {
    values[j] = std::fma(rp_[j - 1], values[j - 1], values[j]);
  }
  values[n - 1] = values[n - 1] * p_[n - 1];
  for (std::size_t j = n - 1; j-- > 0;) {
    values[j] = std::fma(rp_[j], values[j + 1], values[j] * p_[j]);
  }
}

void ImplicitHeatOperator::apply(std::span<const double> x,
                                 std::span<double> out) const {
  const std::size_t n = p_.size();
  if (x.size() != n || out.size() != n) {
    throw ConfigError("tridiagonal apply: size mismatch");
  }
  // Recover r and the diagonals from the stored factors: rp_[0] = r * p_[0]
  // and 1/p_[0] is the first diagonal.
  const double d0 = 1.0 / p_[0];
  const double r = rp_[0] * d0;
  for (std::size_t j = 0; j < n; ++j) {
    double v = (j == 0 || j + 1 == n ? d0 : 1.0 + 2.0 * r) * x[j];
    if (j > 0) v -= r * x[j - 1];
    if (j + 1 < n) v -= r * x[j + 1];
    out[j] = v;
  }
}

HeatSolver::HeatSolver(const Grid& grid, BoundaryKind boundary,
                       SchemeConfig scheme)
    : grid_(grid), boundary_(boundary), scheme_(scheme), op_(grid, boundary) {
  if (scheme_.clamp_bound) {
    const double c = *scheme_.clamp_bound;
    if (!std::isfinite(c) || c <= 0.0) {
      throw ConfigError("clamp_bound must be positive and finite");
    }
  }
}

void HeatSolver::step(std::span<double> state, std::size_t k,
                      std::span<const double> noise_row,
                      const CoefficientSet& coeffs, bool include_d) const {
  const std::size_t n = grid_.space_cells();
  if (state.size() != n || noise_row.size() != n) {
    throw ConfigError("step: state and noise row must both have " +
                      std::to_string(n) + " cells");
  }
  if (k >= grid_.time_steps()) {
    throw ConfigError("step: time index " + std::to_string(k) +
                      " out of range");
  }
  const double t = grid_.time_at(k);
  const double dt = grid_.dt();
  const double inv_dx = 1.0 / grid_.dx();
  for (std::size_t j = 0; j < n; ++j) {
    const double x = grid_.cell_center(j);
    const double u = state[j];
    double drift = coeffs.b(t, x, u);
    if (include_d) drift += coeffs.d(t, x, u);
    state[j] = explicit_rhs(u, dt, drift, coeffs.a(t, x, u), noise_row[j],
                            inv_dx);
  }
  op_.solve_in_place(state);

  const double bound = scheme_.clamp_bound.value_or(0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double v = state[j];
    if (!std::isfinite(v) || (scheme_.clamp_bound && std::abs(v) > bound)) {
      // k + 1 is the index of the state the update just produced.
      throw PathBlowUpError(k + 1, j);
    }
  }
}

PathField HeatSolver::simulate_path(const CoefficientSet& coeffs,
                                    bool include_d,
                                    const NoiseField& noise) const {
  if (!(noise.grid == grid_)) {
    throw ConfigError("simulate_path: noise field grid does not match solver");
  }
  const std::size_t n = grid_.space_cells();
  const std::size_t nt = grid_.time_steps();

  PathField path{
      .grid = grid_,
      .boundary = boundary_,
      .master_seed = noise.master_seed,
      .path_index = noise.path_index,
      .preset_name = coeffs.preset_name,
      .u = std::vector<double>((nt + 1) * n),
  };

  std::vector<double> state(n);
  for (std::size_t j = 0; j < n; ++j) {
    state[j] = coeffs.h(grid_.cell_center(j));
    path.u[j] = state[j];
  }
  if (scheme_.clamp_bound) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(state[j]) > *scheme_.clamp_bound) {
        throw ConfigError(
            "clamp_bound must exceed the initial profile magnitude");
      }
    }
  }

  for (std::size_t k = 0; k < nt; ++k) {
    step(state, k, noise.row(k), coeffs, include_d);
    double* dst = path.u.data() + (k + 1) * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] = state[j];
  }
  return path;
}

double weak_form_residual(const PathField& path, const NoiseField& noise,
                          const CoefficientSet& coeffs, bool include_d,
                          std::size_t m) {
  const Grid& grid = path.grid;
  if (!(noise.grid == grid)) {
    throw ConfigError("weak_form_residual: noise grid does not match path");
  }
  const std::size_t n = grid.space_cells();
  const std::size_t nt = grid.time_steps();
  const double dx = grid.dx();
  const double dt = grid.dt();

  std::vector<double> phi(n);
  const double wave = static_cast<double>(m) * std::numbers::pi /
                      grid.length();
  for (std::size_t j = 0; j < n; ++j) {
    phi[j] = std::cos(wave * grid.cell_center(j));
  }
  const double lap_factor = -wave * wave;  // phi'' = lap_factor * phi

  CompensatedSum term1;
  for (std::size_t j = 0; j < n; ++j) {
    term1.add((path.at(nt, j) - coeffs.h(grid.cell_center(j))) * phi[j] * dx);
  }

  CompensatedSum term2;
  CompensatedSum term3;
  CompensatedSum term4;
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = grid.time_at(k);
    for (std::size_t j = 0; j < n; ++j) {
      const double x = grid.cell_center(j);
      const double u = path.at(k, j);
      term2.add(u * lap_factor * phi[j] * dx * dt);
      term3.add(coeffs.a(t, x, u) * phi[j] * noise.at(k, j));
      double drift = coeffs.b(t, x, u);
      if (include_d) drift += coeffs.d(t, x, u);
      term4.add(drift * phi[j] * dx * dt);
    }
  }

  return std::abs(term1.value() - term2.value() - term3.value() -
                  term4.value());
}

}  // namespace spde
