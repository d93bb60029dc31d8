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
#include <functional>
#include <string>
#include <vector>

#include "grid.hpp"

namespace spde {

/// Parameters of the phase-field (Allen-Cahn type) preset: diffusion
/// coefficient C * sgn(u) * |u|^gamma and drift perturbation 2u(1 - u^2).
struct AllenCahnParams {
  double C = 1.0;
  double gamma = 0.5;
  /// The supported analysis needs gamma in [1/2, 1]; gamma in [0, 1/2) is
  /// accepted only when explicitly flagged as exploratory.
  bool allow_gamma_outside_theorem = false;
};

/// The coefficient functions of one equation family:
///   du = (Laplacian u + b + d) dt + a dW
/// plus the initial condition h and the drift/diffusion ratio R = d/a in a
/// closed form that is total in u (removable singularities resolved
/// algebraically, never by runtime division).
struct CoefficientSet {
  /// Dispatch tag for the batched ensemble kernels; the std::function
  /// evaluators below are the reference semantics for every preset.
  enum class Family { kConstant, kAllenCahn, kLinearDiffusion };

  std::function<double(double t, double x, double u)> a;
  std::function<double(double t, double x, double u)> b;
  std::function<double(double t, double x, double u)> d;
  std::function<double(double t, double x, double u)> ratio;  // R = d/a
  std::function<double(double x)> h;

  Family family = Family::kConstant;
  std::string preset_name;
  // Family parameters. Constant family: const_a/b/d/h. Allen-Cahn: ac plus
  // const_h. Linear diffusion: a = C u, d = slope_d * u, const_h.
  AllenCahnParams ac;
  double const_a = 1.0;
  double const_b = 0.0;
  double const_d = 0.0;
  double const_h = 0.0;
  double slope_d = 0.0;
  /// Modeling choices a reader of the outputs should know about (e.g. the
  /// odd extension of u^gamma to negative u).
  std::vector<std::string> notes;
};

/// Evaluation core of the phase-field preset, shared by the reference
/// std::function evaluators and the batched ensemble kernels so both
/// compute identical floating-point expressions. The common gamma values
/// use square-root chains (exactly rounded, auto-vectorizable); other
/// gammas fall back to pow.
struct PhaseFieldKernel {
  double C = 1.0;
  double gamma = 0.5;
  double two_over_C = 2.0;
  // 0: gamma = 1/2, 1: gamma = 3/4, 2: gamma = 1, 3: generic exponent.
  int tag = 0;

  static PhaseFieldKernel make(double C, double gamma);

  double diffusion(double u) const {
    const double au = std::abs(u);
    const double sgn = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    switch (tag) {
      case 0:
        return C * (sgn * std::sqrt(au));
      case 1: {
        const double s1 = std::sqrt(au);
        const double s2 = std::sqrt(s1);
        return C * (sgn * (s1 * s2));
      }
      case 2:
        return C * u;
      default:
        return u == 0.0 ? 0.0 : C * (sgn * std::pow(au, gamma));
    }
  }

  /// R(u) = (2/C) |u|^{1-gamma} (1 - u^2), total in u.
  double ratio(double u) const {
    const double au = std::abs(u);
    const double shape = 1.0 - u * u;
    switch (tag) {
      case 0:
        return two_over_C * (std::sqrt(au) * shape);
      case 1:
        return two_over_C * (std::sqrt(std::sqrt(au)) * shape);
      case 2:
        return two_over_C * shape;
      default:
        return u == 0.0 ? 0.0
                        : two_over_C * (std::pow(au, 1.0 - gamma) * shape);
    }
  }

  /// d(u) = 2u(1 - u^2).
  static double drift(double u) { return 2.0 * u * (1.0 - u * u); }
};

/// Phase-field preset: a = C sgn(u)|u|^gamma, b = 0, d = 2u(1-u^2),
/// h = h_const. R reduces to (2/C)|u|^{1-gamma}(1-u^2) for gamma < 1 and
/// (2/C)(1-u^2) at gamma = 1.
CoefficientSet allen_cahn_preset(const AllenCahnParams& params,
                                 double h_const = 0.5);

/// Constant coefficients a, b, d and constant initial condition. a must be
/// nonzero so R = d/a is defined everywhere.
CoefficientSet constant_preset(double a_const, double b_const, double d_const,
                               double h_const);

/// Unit additive noise with no drift perturbation: a = 1, b = 0, d = 0.
CoefficientSet zero_drift_preset(double h_const = 0.0);

/// Linear multiplicative diffusion a = C u with b = 0 and linear drift
/// perturbation d = slope_d * u, so R = slope_d / C is constant. C must be
/// nonzero.
CoefficientSet linear_diffusion_preset(double C, double slope_d,
                                       double h_const = 1.0);

/// Evaluates the total closed-form ratio R(t, x, u).
double drift_ratio(const CoefficientSet& coeffs, double t, double x, double u);

/// Boundedness diagnostic for a ratio over a sampled box.
struct RatioDiagnostic {
  double sup_abs_ratio = 0.0;
  double argmax_t = 0.0;
  double argmax_x = 0.0;
  double argmax_u = 0.0;
  bool bounded = true;
  std::string note;
};

/// Samples |R| over a deterministic (t, x, u) lattice covering
/// [0,T] x [0,L] x u_range and heuristically flags unboundedness (non-finite
/// values, huge magnitudes, or strong growth under sample refinement).
RatioDiagnostic validate(const CoefficientSet& coeffs, const Grid& grid,
                         double u_lo, double u_hi);

/// Same diagnostic for an arbitrary (a, d) pair with the ratio formed by
/// pointwise division; exists so candidate coefficient pairs can be probed
/// for boundedness before one commits to a closed-form reduction.
RatioDiagnostic validate_ratio(
    const std::function<double(double, double, double)>& a,
    const std::function<double(double, double, double)>& d, const Grid& grid,
    double u_lo, double u_hi);

}  // namespace spde
