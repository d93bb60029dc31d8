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

#include "coefficients.hpp"

#include <cmath>
#include <limits>

#include "errors.hpp"

namespace spde {
namespace {

constexpr double kHugeRatio = 1e8;

double sample_sup(const std::function<double(double, double, double)>& ratio,
                  const Grid& grid, double u_lo, double u_hi, int u_points,
                  RatioDiagnostic* best) {
  const double T = grid.final_time();
  const double L = grid.length();
  double sup = 0.0;
  for (int it = 0; it <= 4; ++it) {
    const double t = T * static_cast<double>(it) / 4.0;
    for (int ix = 0; ix <= 4; ++ix) {
      const double x = L * static_cast<double>(ix) / 4.0;
      for (int iu = 0; iu < u_points; ++iu) {
        const double u =
            u_lo + (u_hi - u_lo) * static_cast<double>(iu) /
                       static_cast<double>(u_points - 1);
        const double r = std::abs(ratio(t, x, u));
        if (!(r <= sup)) {  // catches NaN and new maxima alike
          sup = r;
          if (best != nullptr) {
            best->sup_abs_ratio = r;
            best->argmax_t = t;
            best->argmax_x = x;
            best->argmax_u = u;
          }
        }
      }
    }
  }
  return sup;
}

RatioDiagnostic diagnose(
    const std::function<double(double, double, double)>& ratio,
    const Grid& grid, double u_lo, double u_hi) {
  if (!(u_lo <= u_hi) || !std::isfinite(u_lo) || !std::isfinite(u_hi)) {
    throw ConfigError("validate: u range must be a finite interval");
  }
  RatioDiagnostic diag;
  const double coarse = sample_sup(ratio, grid, u_lo, u_hi, 101, nullptr);
  const double fine = sample_sup(ratio, grid, u_lo, u_hi, 201, &diag);
  diag.sup_abs_ratio = std::max(coarse, fine);
  if (!std::isfinite(diag.sup_abs_ratio)) {
    diag.bounded = false;
    diag.note = "ratio is non-finite on the sampled range";
  } else if (diag.sup_abs_ratio > kHugeRatio) {
    diag.bounded = false;
    diag.note = "ratio magnitude exceeds 1e8 on the sampled range";
  } else if (coarse > 0.0 && fine > 2.0 * coarse) {
    diag.bounded = false;
    diag.note = "ratio keeps growing under sample refinement";
  } else {
    diag.bounded = true;
    diag.note = "no unboundedness detected on the sampled range";
  }
  return diag;
}

}  // namespace

PhaseFieldKernel PhaseFieldKernel::make(double C, double gamma) {
  PhaseFieldKernel k;
  k.C = C;
  k.gamma = gamma;
  k.two_over_C = 2.0 / C;
  if (gamma == 0.5) {
    k.tag = 0;
  } else if (gamma == 0.75) {
    k.tag = 1;
  } else if (gamma == 1.0) {
    k.tag = 2;
  } else {
    k.tag = 3;
  }
  return k;
}

CoefficientSet allen_cahn_preset(const AllenCahnParams& params,
                                 double h_const) {
  if (params.C == 0.0 || !std::isfinite(params.C)) {
    throw ConfigError("phase-field preset: C must be nonzero and finite");
  }
  if (!std::isfinite(params.gamma) || params.gamma < 0.0 ||
      params.gamma > 1.0) {
    throw ConfigError("phase-field preset: gamma must lie in [0, 1]");
  }
  if (params.gamma < 0.5 && !params.allow_gamma_outside_theorem) {
    throw ConfigError(
        "phase-field preset: gamma below 1/2 is outside the supported range "
        "[1/2, 1]; set allow_gamma_outside_theorem to run anyway");
  }

  const PhaseFieldKernel kernel =
      PhaseFieldKernel::make(params.C, params.gamma);
  CoefficientSet set;
  set.a = [kernel](double, double, double u) { return kernel.diffusion(u); };
  set.b = [](double, double, double) { return 0.0; };
  set.d = [](double, double, double u) {
    return PhaseFieldKernel::drift(u);
  };
  set.ratio = [kernel](double, double, double u) { return kernel.ratio(u); };
  set.h = [h_const](double) { return h_const; };
  set.family = CoefficientSet::Family::kAllenCahn;
  set.preset_name = "allen_cahn";
  set.ac = params;
  set.const_h = h_const;
  set.notes.push_back(
      "diffusion uses the odd extension C*sgn(u)*|u|^gamma for u < 0");
  if (params.gamma < 0.5) {
    set.notes.push_back(
        "gamma below 1/2: outside the supported analysis range, exploratory");
  }
  return set;
}

CoefficientSet constant_preset(double a_const, double b_const, double d_const,
                               double h_const) {
  if (a_const == 0.0 || !std::isfinite(a_const)) {
    throw ConfigError(
        "constant preset: a must be nonzero and finite so the ratio d/a is "
        "defined");
  }
  const double r = d_const / a_const;
  CoefficientSet set;
  set.a = [a_const](double, double, double) { return a_const; };
  set.b = [b_const](double, double, double) { return b_const; };
  set.d = [d_const](double, double, double) { return d_const; };
  set.ratio = [r](double, double, double) { return r; };
  set.h = [h_const](double) { return h_const; };
  set.family = CoefficientSet::Family::kConstant;
  set.preset_name = "constant";
  set.const_a = a_const;
  set.const_b = b_const;
  set.const_d = d_const;
  set.const_h = h_const;
  return set;
}

CoefficientSet zero_drift_preset(double h_const) {
  CoefficientSet set = constant_preset(1.0, 0.0, 0.0, h_const);
  set.preset_name = "zero_drift";
  return set;
}

CoefficientSet linear_diffusion_preset(double C, double slope_d,
                                       double h_const) {
  if (C == 0.0 || !std::isfinite(C)) {
    throw ConfigError("linear diffusion preset: C must be nonzero and finite");
  }
  const double r = slope_d / C;
  CoefficientSet set;
  set.a = [C](double, double, double u) { return C * u; };
  set.b = [](double, double, double) { return 0.0; };
  set.d = [slope_d](double, double, double u) { return slope_d * u; };
  set.ratio = [r](double, double, double) { return r; };
  set.h = [h_const](double) { return h_const; };
  set.family = CoefficientSet::Family::kLinearDiffusion;
  set.preset_name = "linear_diffusion";
  set.ac.C = C;
  set.slope_d = slope_d;
  set.const_h = h_const;
  set.notes.push_back(
      "ratio (slope_d*u)/(C*u) reduced to the constant slope_d/C; the "
      "removable singularity at u = 0 is resolved algebraically");
  return set;
}

double drift_ratio(const CoefficientSet& coeffs, double t, double x,
                   double u) {
  return coeffs.ratio(t, x, u);
}

RatioDiagnostic validate(const CoefficientSet& coeffs, const Grid& grid,
                         double u_lo, double u_hi) {
  return diagnose(coeffs.ratio, grid, u_lo, u_hi);
}

RatioDiagnostic validate_ratio(
    const std::function<double(double, double, double)>& a,
    const std::function<double(double, double, double)>& d, const Grid& grid,
    double u_lo, double u_hi) {
  auto ratio = [&a, &d](double t, double x, double u) {
    const double den = a(t, x, u);
    const double num = d(t, x, u);
    if (den == 0.0) {
      return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return num / den;
  };
  return diagnose(ratio, grid, u_lo, u_hi);
}

}  // namespace spde
