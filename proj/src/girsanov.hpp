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
#include <span>
#include <vector>

#include "coefficients.hpp"
#include "heat_solver.hpp"
#include "noise.hpp"

namespace spde {

/// Direction of the measure change encoded by a weight trajectory.
/// kAddDrift weights a driftless-path ensemble so it averages like the
/// drifted law; kRemoveDrift weights a drifted ensemble the other way.
enum class TiltDirection { kAddDrift, kRemoveDrift };

/// Running log-density and quadratic variation of one path's change of
/// measure, sampled at every time index.
struct WeightTrajectory {
  std::vector<double> log_xi;    // size nt+1, log_xi[0] = 0
  std::vector<double> r2_accum;  // size nt+1, nondecreasing from 0

  /// First time index k with r2_accum[k] >= level; nt when the level is
  /// never reached. A crossing exactly at the final index is
  /// indistinguishable from no crossing, by construction.
  std::size_t tau_index(double level) const;

  /// log-density frozen at the level crossing (terminal value when the
  /// trajectory never crosses).
  double stopped_log_xi(double level) const {
    return log_xi[tau_index(level)];
  }

  /// True when the stopping time for this level coincides with the final
  /// time, i.e. the localization at this level keeps the whole path.
  bool stopped_at_end(double level) const {
    return tau_index(level) + 1 == log_xi.size();
  }

  double log_xi_terminal() const { return log_xi.back(); }
  double r2_terminal() const { return r2_accum.back(); }
};

/// Accumulates the discrete exponential-martingale log-density along a
/// realized path and its driving noise. Per step k, with R evaluated at the
/// left point (t_k, x_j, u(t_k, x_j)) and A = dt*dx:
///   s1 = Sum_j R*dW   (plain left-to-right sum)
///   s2 = Sum_j R*R    (plain left-to-right sum)
///   log_xi   += sign(direction)*s1 - 0.5*A*s2
///   r2_accum += A*s2
/// The summation order is part of the contract: the lane-batched ensemble
/// runner reproduces it bit for bit. R = d/a via coeffs.ratio.
WeightTrajectory accumulate_weights(
    const PathField& path, const NoiseField& noise,
    const CoefficientSet& coeffs,
    TiltDirection direction = TiltDirection::kAddDrift);

/// Noise field with every increment shifted by the drift-to-diffusion ratio
/// along the path: dW'[k][j] = dW[k][j] + scale * R(t_k, x_j, u_kj) * dt*dx.
/// With scale = +1 this realizes, at lattice level, the driving noise under
/// which the drifted dynamics look driftless. Provenance fields are copied
/// from the input noise.
NoiseField shifted_noise(const NoiseField& noise, const PathField& path,
                         const CoefficientSet& coeffs, double scale = 1.0);

/// (sum w)^2 / (sum w^2) from log-weights, computed after shifting by the
/// maximum so the exponentials cannot overflow. Throws ComputeError when
/// every weight is zero or any log-weight is NaN/+inf.
double effective_sample_size(std::span<const double> log_weights);

struct NovikovEstimate {
  double estimate = 0.0;  // mean of exp(r2/2) over retained paths; NaN if none
  double fraction_overflowed = 0.0;
  std::size_t retained = 0;
};

/// Sample mean of exp(r2/2) over terminal quadratic variations, excluding
/// (and counting) paths where the exponential would overflow a double.
NovikovEstimate novikov_estimate(std::span<const double> r2_terminal);

}  // namespace spde
