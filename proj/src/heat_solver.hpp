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

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "grid.hpp"
#include "noise.hpp"

namespace spde {

enum class BoundaryKind { kNeumann, kDirichlet };

/// Scheme knobs. The Laplacian is always fully implicit; clamp_bound, when
/// set, turns runaway states into explicit path-blow-up errors instead of
/// letting them pollute ensemble statistics.
struct SchemeConfig {
  std::optional<double> clamp_bound;
};

/// One realized solution surface u(t_k, x_j).
struct PathField {
  Grid grid;
  BoundaryKind boundary = BoundaryKind::kNeumann;
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
  std::string preset_name;
  std::vector<double> u;  // row-major, (nt + 1) * nx

  double at(std::size_t k, std::size_t j) const {
    return u[k * grid.space_cells() + j];
  }
  std::span<const double> row(std::size_t k) const {
    return {u.data() + k * grid.space_cells(), grid.space_cells()};
  }
};

/// Prefactored implicit operator M = I - dt*DiscreteLaplacian for one grid
/// and boundary kind. M is constant tridiagonal, so one LU factorization at
/// construction serves every step and every path on the grid.
class ImplicitHeatOperator {
 public:
  ImplicitHeatOperator(const Grid& grid, BoundaryKind boundary);

  /// Solves M x = rhs in place.
  void solve_in_place(std::span<double> values) const;

  /// out = M x; used to verify solve residuals.
  void apply(std::span<const double> x, std::span<double> out) const;

  /// Factor arrays for the lane-batched ensemble runner; using these with
  /// the same recurrences reproduces solve_in_place bit for bit.
  /// Forward sweep: y_j = fma(rp[j-1], y_{j-1}, rhs_j).
  /// Back sweep: x_{n-1} = y_{n-1} * p[n-1]; x_j = fma(rp[j], x_{j+1}, y_j * p[j]).
  std::span<const double> p() const { return p_; }
  std::span<const double> rp() const { return rp_; }

 private:
  std::vector<double> p_;   // 1 / pivot
  std::vector<double> rp_;  // r / pivot, r = dt/dx^2
};

/// Explicit part of one update: rhs = u + dt*drift + a * (dW/dx). Written
/// with explicit fma so every caller (reference solver, batched runner)
/// computes the identical floating-point value.
inline double explicit_rhs(double u, double dt, double drift, double a_value,
                           double dw, double inv_dx) {
  return std::fma(a_value, dw * inv_dx, std::fma(dt, drift, u));
}

/// Semi-implicit lattice scheme for du = (Laplacian u + drift) dt + a dW:
/// implicit diffusion, explicit drift, explicit left-point noise coupling.
class HeatSolver {
 public:
  HeatSolver(const Grid& grid, BoundaryKind boundary, SchemeConfig scheme);

  const Grid& grid() const { return grid_; }
  BoundaryKind boundary() const { return boundary_; }
  const SchemeConfig& scheme() const { return scheme_; }
  const ImplicitHeatOperator& op() const { return op_; }

  /// Advances state (size nx) from time index k to k+1 in place, consuming
  /// noise row k. drift = b (+ d when include_d).
  void step(std::span<double> state, std::size_t k,
            std::span<const double> noise_row, const CoefficientSet& coeffs,
            bool include_d) const;

  /// Full rollout from u[0] = h(x_j). Bit-exactly deterministic in
  /// (coeffs, include_d, noise).
  PathField simulate_path(const CoefficientSet& coeffs, bool include_d,
                          const NoiseField& noise) const;

 private:
  Grid grid_;
  BoundaryKind boundary_;
  SchemeConfig scheme_;
  ImplicitHeatOperator op_;
};

/// Discrete residual of the test-function formulation at t = T against
/// phi_m(x) = cos(m pi x / L):
///   | Sum (u(T)-h) phi dx - SumSum u phi'' dx dt - SumSum a phi dW
///     - SumSum drift phi dx dt |
/// All time integrals use left-point evaluation. phi_m satisfies
/// phi'(0) = phi'(L) = 0 for every m.
double weak_form_residual(const PathField& path, const NoiseField& noise,
                          const CoefficientSet& coeffs, bool include_d,
                          std::size_t m);

}  // namespace spde
