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

#include "ensemble.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#if defined(__AVX512F__) && defined(__AVX512DQ__)
#include <immintrin.h>
#define SPDE_LAB_ENSEMBLE_AVX512 1
#else
#define SPDE_LAB_ENSEMBLE_AVX512 0
#endif

#include "errors.hpp"
#include "rng.hpp"
#include "summation.hpp"

// The ensemble runner advances kLanes paths per tile with all per-path
// quantities held in lane-major arrays. Every operation is elementwise
// across lanes and evaluates the exact expression the single-path reference
// code uses; with implicit fp contraction disabled, a lane's trajectory is
// bit-identical to a reference simulate_path / accumulate_weights run of
// the same path index, whatever the vector width and thread count. The
// AVX-512 kernels below keep that property because packed IEEE mul, add,
// fma, and sqrt round exactly like their scalar counterparts.

namespace spde {

namespace {

constexpr std::size_t kLanes = 8;
constexpr std::uint32_t kNotCrossed = 0xffffffffu;

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

enum class KernelKind { kConst, kAcHalf, kAcThreeQuarters, kAcOne, kGeneric };

KernelKind resolve_kernel(const CoefficientSet& coeffs) {
  switch (coeffs.family) {
    case CoefficientSet::Family::kConstant:
      return KernelKind::kConst;
    case CoefficientSet::Family::kAllenCahn:
      switch (PhaseFieldKernel::make(coeffs.ac.C, coeffs.ac.gamma).tag) {
        case 0:
          return KernelKind::kAcHalf;
        case 1:
          return KernelKind::kAcThreeQuarters;
        case 2:
          return KernelKind::kAcOne;
        default:
          return KernelKind::kGeneric;
      }
    case CoefficientSet::Family::kLinearDiffusion:
      return KernelKind::kGeneric;
  }
  return KernelKind::kGeneric;
}

struct RunnerShared {
  const CoefficientSet* coeffs;
  const EnsembleConfig* config;
  Grid grid;
  ImplicitHeatOperator op;
  std::vector<double> x_centers;
  std::vector<double> h_row;
  double sigma;      // sqrt(dt*dx), the per-increment noise scale
  double inv_dx;
  double dt;
  double area;       // dt*dx
  double bound_eff;  // clamp bound, or DBL_MAX when only finiteness matters
  bool weighted;
  std::size_t n_paths;
  std::size_t tiles;
  EnsembleResult* out;
  // Constant-family values, precomputed with the same expressions the
  // preset's reference evaluators use.
  double const_a = 1.0;
  double drift_const = 0.0;  // b (+ d when the drift is included)
  double ratio_const = 0.0;
  // Phase-field values.
  double C = 1.0;
  double two_over_C = 2.0;
};

/// Per-worker scratch. The three lane-major panels live in one allocation,
/// rounded up to 64-byte alignment so packed loads never split cache lines.
struct Workspace {
  std::vector<double> buf;
  double* state;  // nx x kLanes, lane-major
  double* raw;    // kLanes rows of nx raw normals
  double* dw;     // nx x kLanes, lane-major scaled increments
  double* tmp;    // nx, one lane's terminal state
  std::array<double, kLanes> log_acc{};
  std::array<double, kLanes> r2_acc{};
  std::array<double, kLanes> s1{};
  std::array<double, kLanes> s2{};
  std::array<std::uint8_t, kLanes> dead{};
  std::array<std::uint8_t, kLanes> ok{};
  std::array<std::uint32_t, kLanes> next_level{};
  std::vector<double> stopped;          // kLanes * n_levels
  std::vector<std::uint32_t> cross_at;  // kLanes * n_levels

  Workspace(std::size_t nx, std::size_t n_levels)
      : buf(3 * nx * kLanes + nx + kLanes),
        stopped(kLanes * n_levels),
        cross_at(kLanes * n_levels) {
    double* base = buf.data();
    const auto rem = reinterpret_cast<std::uintptr_t>(base) % 64;
    if (rem != 0) base += (64 - rem) / sizeof(double);
    state = base;
    raw = state + nx * kLanes;
    dw = raw + nx * kLanes;
    tmp = dw + nx * kLanes;
  }
};

/// dw[j][lane] = raw[lane][j] * sigma for an 8-row panel.
void transpose_scale(const double* raw, double* dw, std::size_t n,
                     double sigma) {
  std::size_t j0 = 0;
#if SPDE_LAB_ENSEMBLE_AVX512
  const __m512d sig = _mm512_set1_pd(sigma);
  const __m512i pair_lo = _mm512_set_epi64(11, 3, 10, 2, 9, 1, 8, 0);
  const __m512i pair_hi = _mm512_set_epi64(15, 7, 14, 6, 13, 5, 12, 4);
  const __m512i quad_lo = _mm512_set_epi64(11, 10, 3, 2, 9, 8, 1, 0);
  const __m512i quad_hi = _mm512_set_epi64(15, 14, 7, 6, 13, 12, 5, 4);
  const __m512i half_lo = _mm512_set_epi64(11, 10, 9, 8, 3, 2, 1, 0);
  const __m512i half_hi = _mm512_set_epi64(15, 14, 13, 12, 7, 6, 5, 4);
  for (; j0 + 8 <= n; j0 += 8) {
    const __m512d r0 = _mm512_loadu_pd(raw + 0 * n + j0);
    const __m512d r1 = _mm512_loadu_pd(raw + 1 * n + j0);
    const __m512d r2 = _mm512_loadu_pd(raw + 2 * n + j0);
    const __m512d r3 = _mm512_loadu_pd(raw + 3 * n + j0);
    const __m512d r4 = _mm512_loadu_pd(raw + 4 * n + j0);
    const __m512d r5 = _mm512_loadu_pd(raw + 5 * n + j0);
    const __m512d r6 = _mm512_loadu_pd(raw + 6 * n + j0);
    const __m512d r7 = _mm512_loadu_pd(raw + 7 * n + j0);

    const __m512d a0 = _mm512_permutex2var_pd(r0, pair_lo, r1);
    const __m512d a1 = _mm512_permutex2var_pd(r0, pair_hi, r1);
    const __m512d a2 = _mm512_permutex2var_pd(r2, pair_lo, r3);
    const __m512d a3 = _mm512_permutex2var_pd(r2, pair_hi, r3);
    const __m512d a4 = _mm512_permutex2var_pd(r4, pair_lo, r5);
    const __m512d a5 = _mm512_permutex2var_pd(r4, pair_hi, r5);
    const __m512d a6 = _mm512_permutex2var_pd(r6, pair_lo, r7);
    const __m512d a7 = _mm512_permutex2var_pd(r6, pair_hi, r7);

    const __m512d b0 = _mm512_permutex2var_pd(a0, quad_lo, a2);
    const __m512d b1 = _mm512_permutex2var_pd(a0, quad_hi, a2);
    const __m512d b2 = _mm512_permutex2var_pd(a1, quad_lo, a3);
    const __m512d b3 = _mm512_permutex2var_pd(a1, quad_hi, a3);
    const __m512d b4 = _mm512_permutex2var_pd(a4, quad_lo, a6);
    const __m512d b5 = _mm512_permutex2var_pd(a4, quad_hi, a6);
    const __m512d b6 = _mm512_permutex2var_pd(a5, quad_lo, a7);
    const __m512d b7 = _mm512_permutex2var_pd(a5, quad_hi, a7);

    __m512d c0 = _mm512_permutex2var_pd(b0, half_lo, b4);
    __m512d c1 = _mm512_permutex2var_pd(b0, half_hi, b4);
    __m512d c2 = _mm512_permutex2var_pd(b1, half_lo, b5);
    __m512d c3 = _mm512_permutex2var_pd(b1, half_hi, b5);
    __m512d c4 = _mm512_permutex2var_pd(b2, half_lo, b6);
    __m512d c5 = _mm512_permutex2var_pd(b2, half_hi, b6);
    __m512d c6 = _mm512_permutex2var_pd(b3, half_lo, b7);
    __m512d c7 = _mm512_permutex2var_pd(b3, half_hi, b7);

    _mm512_storeu_pd(dw + (j0 + 0) * kLanes, _mm512_mul_pd(c0, sig));
    _mm512_storeu_pd(dw + (j0 + 1) * kLanes, _mm512_mul_pd(c1, sig));
    _mm512_storeu_pd(dw + (j0 + 2) * kLanes, _mm512_mul_pd(c2, sig));
    _mm512_storeu_pd(dw + (j0 + 3) * kLanes, _mm512_mul_pd(c3, sig));
    _mm512_storeu_pd(dw + (j0 + 4) * kLanes, _mm512_mul_pd(c4, sig));
    _mm512_storeu_pd(dw + (j0 + 5) * kLanes, _mm512_mul_pd(c5, sig));
    _mm512_storeu_pd(dw + (j0 + 6) * kLanes, _mm512_mul_pd(c6, sig));
    _mm512_storeu_pd(dw + (j0 + 7) * kLanes, _mm512_mul_pd(c7, sig));
  }
#endif
  for (std::size_t j = j0; j < n; ++j) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      dw[j * kLanes + l] = raw[l * n + j] * sigma;
    }
  }
}

#if SPDE_LAB_ENSEMBLE_AVX512

/// Packed update of one time step for the closed-form kernel families.
/// Instruction-for-instruction mirror of the scalar body below.
template <KernelKind K, bool IncludeD>
void advance_tile_step_vec(const RunnerShared& sh, Workspace& ws) {
  const std::size_t n = sh.grid.space_cells();
  double* state = ws.state;
  const double* dw = ws.dw;

  const __m512d zero = _mm512_setzero_pd();
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d mone = _mm512_set1_pd(-1.0);
  const __m512d two = _mm512_set1_pd(2.0);
  const __m512d sign_bit = _mm512_set1_pd(-0.0);
  const __m512d cv = _mm512_set1_pd(sh.C);
  const __m512d tcv = _mm512_set1_pd(sh.two_over_C);
  const __m512d dtv = _mm512_set1_pd(sh.dt);
  const __m512d inv_dx = _mm512_set1_pd(sh.inv_dx);
  const __m512d a_const = _mm512_set1_pd(sh.const_a);
  const __m512d drift_const = _mm512_set1_pd(sh.drift_const);
  const __m512d ratio_const = _mm512_set1_pd(sh.ratio_const);

  __m512d s1 = zero;
  __m512d s2 = zero;
  for (std::size_t j = 0; j < n; ++j) {
    const __m512d u = _mm512_loadu_pd(state + j * kLanes);
    __m512d a8;
    __m512d r8;
    __m512d drift;
    if constexpr (K == KernelKind::kConst) {
      a8 = a_const;
      r8 = ratio_const;
      drift = drift_const;
    } else {
      const __m512d au = _mm512_andnot_pd(sign_bit, u);
      const __mmask8 pos = _mm512_cmp_pd_mask(u, zero, _CMP_GT_OQ);
      const __mmask8 neg = _mm512_cmp_pd_mask(u, zero, _CMP_LT_OQ);
      __m512d sgn = _mm512_mask_blend_pd(pos, zero, one);
      sgn = _mm512_mask_blend_pd(neg, sgn, mone);
      const __m512d shape = _mm512_sub_pd(one, _mm512_mul_pd(u, u));
      if constexpr (K == KernelKind::kAcHalf) {
        const __m512d s = _mm512_sqrt_pd(au);
        a8 = _mm512_mul_pd(cv, _mm512_mul_pd(sgn, s));
        r8 = _mm512_mul_pd(tcv, _mm512_mul_pd(s, shape));
      } else if constexpr (K == KernelKind::kAcThreeQuarters) {
        const __m512d sa = _mm512_sqrt_pd(au);
        const __m512d sb = _mm512_sqrt_pd(sa);
        a8 = _mm512_mul_pd(cv, _mm512_mul_pd(sgn, _mm512_mul_pd(sa, sb)));
        r8 = _mm512_mul_pd(tcv, _mm512_mul_pd(sb, shape));
      } else {
        a8 = _mm512_mul_pd(cv, u);
        r8 = _mm512_mul_pd(tcv, shape);
      }
      if constexpr (IncludeD) {
        // b = 0 for this family; the reference evaluates b then adds d.
        drift = _mm512_add_pd(zero,
                              _mm512_mul_pd(_mm512_mul_pd(two, u), shape));
      } else {
        drift = zero;
      }
    }
    const __m512d inc = _mm512_loadu_pd(dw + j * kLanes);
    const __m512d rhs = _mm512_fmadd_pd(a8, _mm512_mul_pd(inc, inv_dx),
                                        _mm512_fmadd_pd(dtv, drift, u));
    _mm512_storeu_pd(state + j * kLanes, rhs);
    s1 = _mm512_add_pd(s1, _mm512_mul_pd(r8, inc));
    s2 = _mm512_add_pd(s2, _mm512_mul_pd(r8, r8));
  }
  _mm512_storeu_pd(ws.s1.data(), s1);
  _mm512_storeu_pd(ws.s2.data(), s2);

  const double* p = sh.op.p().data();
  const double* rp = sh.op.rp().data();
  __m512d carry = _mm512_loadu_pd(state);
  for (std::size_t j = 1; j < n; ++j) {
    carry = _mm512_fmadd_pd(_mm512_set1_pd(rp[j - 1]), carry,
                            _mm512_loadu_pd(state + j * kLanes));
    _mm512_storeu_pd(state + j * kLanes, carry);
  }
  carry = _mm512_mul_pd(carry, _mm512_set1_pd(p[n - 1]));
  _mm512_storeu_pd(state + (n - 1) * kLanes, carry);
  for (std::size_t j = n - 1; j-- > 0;) {
    carry = _mm512_fmadd_pd(
        _mm512_set1_pd(rp[j]), carry,
        _mm512_mul_pd(_mm512_loadu_pd(state + j * kLanes),
                      _mm512_set1_pd(p[j])));
    _mm512_storeu_pd(state + j * kLanes, carry);
  }

  const __m512d bound = _mm512_set1_pd(sh.bound_eff);
  __mmask8 bad = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const __m512d av =
        _mm512_andnot_pd(sign_bit, _mm512_loadu_pd(state + j * kLanes));
    // True for NaN and infinity as well as clamp violations.
    bad |= _mm512_cmp_pd_mask(av, bound, _CMP_NLE_UQ);
  }
  for (std::size_t l = 0; l < kLanes; ++l) {
    ws.ok[l] = (bad >> l) & 1 ? 0 : 1;
  }
}

#endif  // SPDE_LAB_ENSEMBLE_AVX512

/// One semi-implicit update of all lanes plus the per-step weight sums
/// s1 = Sum_j R*dW and s2 = Sum_j R*R, left in ws.s1 / ws.s2.
template <KernelKind K, bool IncludeD>
void advance_tile_step(const RunnerShared& sh, Workspace& ws, std::size_t k) {
#if SPDE_LAB_ENSEMBLE_AVX512
  if constexpr (K != KernelKind::kGeneric) {
    advance_tile_step_vec<K, IncludeD>(sh, ws);
    return;
  }
#endif
  const std::size_t n = sh.grid.space_cells();
  const double t = sh.grid.time_at(k);
  const double dt = sh.dt;
  const double inv_dx = sh.inv_dx;
  double* state = ws.state;
  const double* dw = ws.dw;

  double s1[kLanes] = {};
  double s2[kLanes] = {};
  for (std::size_t j = 0; j < n; ++j) {
    double a8[kLanes];
    double drift8[kLanes];
    double r8[kLanes];
    double* u = state + j * kLanes;
    if constexpr (K == KernelKind::kConst) {
      for (std::size_t l = 0; l < kLanes; ++l) {
        a8[l] = sh.const_a;
        drift8[l] = sh.drift_const;
        r8[l] = sh.ratio_const;
      }
    } else if constexpr (K == KernelKind::kGeneric) {
      const CoefficientSet& c = *sh.coeffs;
      const double x = sh.x_centers[j];
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double uu = u[l];
        a8[l] = c.a(t, x, uu);
        double drift = c.b(t, x, uu);
        if constexpr (IncludeD) drift += c.d(t, x, uu);
        drift8[l] = drift;
        r8[l] = c.ratio(t, x, uu);
      }
    } else {
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double uu = u[l];
        const double au = std::abs(uu);
        const double sgn = uu > 0.0 ? 1.0 : (uu < 0.0 ? -1.0 : 0.0);
        const double shape = 1.0 - uu * uu;
        if constexpr (K == KernelKind::kAcHalf) {
          const double s = std::sqrt(au);
          a8[l] = sh.C * (sgn * s);
          r8[l] = sh.two_over_C * (s * shape);
        } else if constexpr (K == KernelKind::kAcThreeQuarters) {
          const double sa = std::sqrt(au);
          const double sb = std::sqrt(sa);
          a8[l] = sh.C * (sgn * (sa * sb));
          r8[l] = sh.two_over_C * (sb * shape);
        } else {
          a8[l] = sh.C * uu;
          r8[l] = sh.two_over_C * shape;
        }
        // b = 0 for this family; the reference evaluates b then adds d.
        drift8[l] = IncludeD ? 0.0 + (2.0 * uu * shape) : 0.0;
      }
    }

    for (std::size_t l = 0; l < kLanes; ++l) {
      const double uu = u[l];
      const double inc = dw[j * kLanes + l];
      u[l] = std::fma(a8[l], inc * inv_dx, std::fma(dt, drift8[l], uu));
      s1[l] += r8[l] * inc;
      s2[l] += r8[l] * r8[l];
    }
  }

  // Per-lane tridiagonal solve, same recurrences as solve_in_place.
  const double* p = sh.op.p().data();
  const double* rp = sh.op.rp().data();
  for (std::size_t j = 1; j < n; ++j) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      state[j * kLanes + l] = std::fma(rp[j - 1], state[(j - 1) * kLanes + l],
                                       state[j * kLanes + l]);
    }
  }
  for (std::size_t l = 0; l < kLanes; ++l) {
    state[(n - 1) * kLanes + l] = state[(n - 1) * kLanes + l] * p[n - 1];
  }
  for (std::size_t j = n - 1; j-- > 0;) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      state[j * kLanes + l] = std::fma(rp[j], state[(j + 1) * kLanes + l],
                                       state[j * kLanes + l] * p[j]);
    }
  }

  for (std::size_t l = 0; l < kLanes; ++l) ws.ok[l] = 1;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      // False for NaN and infinity as well as clamp violations.
      ws.ok[l] &= std::abs(state[j * kLanes + l]) <= sh.bound_eff ? 1 : 0;
    }
  }
  for (std::size_t l = 0; l < kLanes; ++l) {
    ws.s1[l] = s1[l];
    ws.s2[l] = s2[l];
  }
}

/// Folds one step's sums into the running log-density and quadratic
/// variation, marks newly dead lanes, and records level crossings.
void close_step(const RunnerShared& sh, Workspace& ws, std::size_t k) {
  const double area = sh.area;
  const std::span<const double> levels = sh.config->levels;
  const std::size_t n_levels = levels.size();
  for (std::size_t l = 0; l < kLanes; ++l) {
    if (ws.dead[l]) continue;
    if (!ws.ok[l]) {
      // Path left the admissible range this step; exclude it without
      // folding the step, like the reference which throws before weights.
      ws.dead[l] = 1;
      continue;
    }
    ws.log_acc[l] += ws.s1[l] - 0.5 * area * ws.s2[l];
    ws.r2_acc[l] += area * ws.s2[l];
    if (!std::isfinite(ws.r2_acc[l]) ||
        (sh.weighted && !std::isfinite(ws.log_acc[l]))) {
      ws.dead[l] = 1;
      continue;
    }
    while (ws.next_level[l] < n_levels &&
           ws.r2_acc[l] >= levels[ws.next_level[l]]) {
      const std::size_t slot = l * n_levels + ws.next_level[l];
      ws.stopped[slot] = ws.log_acc[l];
      ws.cross_at[slot] = static_cast<std::uint32_t>(k + 1);
      ++ws.next_level[l];
    }
  }
}

void write_tile(const RunnerShared& sh, Workspace& ws, std::size_t tile) {
  const std::size_t n = sh.grid.space_cells();
  const std::size_t nt = sh.grid.time_steps();
  const std::size_t n_funcs = sh.config->functionals.size();
  const std::size_t n_levels = sh.config->levels.size();
  const double qnan = std::numeric_limits<double>::quiet_NaN();
  EnsembleResult& out = *sh.out;

  for (std::size_t l = 0; l < kLanes; ++l) {
    const std::size_t path = tile * kLanes + l;
    if (path >= sh.n_paths) break;
    if (ws.dead[l]) {
      out.blow_up[path] = 1;
      for (std::size_t f = 0; f < n_funcs; ++f) {
        out.values[path * n_funcs + f] = qnan;
      }
      out.log_weight[path] = qnan;
      out.r2_terminal[path] = qnan;
      for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
        out.stopped_log_weight[path * n_levels + lvl] = qnan;
        out.tau_at_end[path * n_levels + lvl] = 0;
      }
      continue;
    }
    out.blow_up[path] = 0;
    for (std::size_t j = 0; j < n; ++j) ws.tmp[j] = ws.state[j * kLanes + l];
    for (std::size_t f = 0; f < n_funcs; ++f) {
      out.values[path * n_funcs + f] = evaluate_functional(
          sh.config->functionals[f], {ws.tmp, n}, sh.grid);
    }
    out.log_weight[path] = sh.weighted ? ws.log_acc[l] : 0.0;
    out.r2_terminal[path] = ws.r2_acc[l];
    for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
      const std::size_t dst = path * n_levels + lvl;
      if (lvl < ws.next_level[l]) {
        const std::size_t src = l * n_levels + lvl;
        out.stopped_log_weight[dst] = sh.weighted ? ws.stopped[src] : 0.0;
        out.tau_at_end[dst] = ws.cross_at[src] == nt ? 1 : 0;
      } else {
        out.stopped_log_weight[dst] = sh.weighted ? ws.log_acc[l] : 0.0;
        out.tau_at_end[dst] = 1;
      }
    }
  }
}

template <KernelKind K, bool IncludeD>
void run_tile(const RunnerShared& sh, Workspace& ws, std::size_t tile) {
  const std::size_t n = sh.grid.space_cells();
  const std::size_t nt = sh.grid.time_steps();
  const std::uint64_t base = static_cast<std::uint64_t>(tile) * kLanes;

  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      ws.state[j * kLanes + l] = sh.h_row[j];
    }
  }
  ws.log_acc.fill(0.0);
  ws.r2_acc.fill(0.0);
  ws.dead.fill(0);
  ws.next_level.fill(0);
  std::fill(ws.cross_at.begin(), ws.cross_at.end(), kNotCrossed);

  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      rng::fill_standard_normal_row(sh.config->master_seed, base + l, k,
                                    {ws.raw + l * n, n});
    }
    transpose_scale(ws.raw, ws.dw, n, sh.sigma);
    advance_tile_step<K, IncludeD>(sh, ws, k);
    close_step(sh, ws, k);
  }
  write_tile(sh, ws, tile);
}

using TileFn = void (*)(const RunnerShared&, Workspace&, std::size_t);

TileFn select_tile_fn(KernelKind kind, bool include_d) {
  switch (kind) {
    case KernelKind::kConst:
      return include_d ? run_tile<KernelKind::kConst, true>
                       : run_tile<KernelKind::kConst, false>;
    case KernelKind::kAcHalf:
      return include_d ? run_tile<KernelKind::kAcHalf, true>
                       : run_tile<KernelKind::kAcHalf, false>;
    case KernelKind::kAcThreeQuarters:
      return include_d ? run_tile<KernelKind::kAcThreeQuarters, true>
                       : run_tile<KernelKind::kAcThreeQuarters, false>;
    case KernelKind::kAcOne:
      return include_d ? run_tile<KernelKind::kAcOne, true>
                       : run_tile<KernelKind::kAcOne, false>;
    case KernelKind::kGeneric:
      break;
  }
  return include_d ? run_tile<KernelKind::kGeneric, true>
                   : run_tile<KernelKind::kGeneric, false>;
}

void validate_config(const EnsembleConfig& config) {
  if (config.paths < 2) {
    throw ConfigError("ensemble: at least 2 paths required");
  }
  if (config.threads < 0) {
    throw ConfigError("ensemble: threads must be >= 0");
  }
  double prev = 0.0;
  for (double lvl : config.levels) {
    if (!std::isfinite(lvl) || lvl <= prev) {
      throw ConfigError(
          "ensemble: truncation levels must be finite, positive, and "
          "strictly increasing");
    }
    prev = lvl;
  }
  for (const FunctionalSpec& f : config.functionals) {
    if (f.kind == FunctionalSpec::Kind::kPointValue &&
        (!std::isfinite(f.x0) || f.x0 < 0.0 ||
         f.x0 > config.grid.length())) {
      throw ConfigError("ensemble: point_value location " +
                        format_double(f.x0) + " outside [0, L]");
    }
  }
}

EnsembleResult run_ensemble(const CoefficientSet& coeffs,
                            const EnsembleConfig& config, bool include_d,
                            bool weighted) {
  validate_config(config);
  const Grid& grid = config.grid;
  const std::size_t n = grid.space_cells();
  const std::size_t n_paths = config.paths;
  const std::size_t n_funcs = config.functionals.size();
  const std::size_t n_levels = config.levels.size();

  RunnerShared sh{
      .coeffs = &coeffs,
      .config = &config,
      .grid = grid,
      .op = ImplicitHeatOperator(grid, config.boundary),
      .x_centers = {},
      .h_row = {},
      .sigma = std::sqrt(grid.dt() * grid.dx()),
      .inv_dx = 1.0 / grid.dx(),
      .dt = grid.dt(),
      .area = grid.cell_area(),
      .bound_eff = std::numeric_limits<double>::max(),
      .weighted = weighted,
      .n_paths = n_paths,
      .tiles = (n_paths + kLanes - 1) / kLanes,
      .out = nullptr,
  };
  sh.x_centers.resize(n);
  sh.h_row.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    sh.x_centers[j] = grid.cell_center(j);
    sh.h_row[j] = coeffs.h(sh.x_centers[j]);
  }
  if (config.scheme.clamp_bound) {
    const double c = *config.scheme.clamp_bound;
    if (!std::isfinite(c) || c <= 0.0) {
      throw ConfigError("clamp_bound must be positive and finite");
    }
    for (double hv : sh.h_row) {
      if (std::abs(hv) > c) {
        throw ConfigError(
            "clamp_bound must exceed the initial profile magnitude");
      }
    }
    sh.bound_eff = c;
  }
  switch (coeffs.family) {
    case CoefficientSet::Family::kConstant:
      sh.const_a = coeffs.const_a;
      sh.drift_const = coeffs.const_b;
      if (include_d) sh.drift_const = coeffs.const_b + coeffs.const_d;
      sh.ratio_const = coeffs.const_d / coeffs.const_a;
      break;
    case CoefficientSet::Family::kAllenCahn: {
      const PhaseFieldKernel kern =
          PhaseFieldKernel::make(coeffs.ac.C, coeffs.ac.gamma);
      sh.C = kern.C;
      sh.two_over_C = kern.two_over_C;
      break;
    }
    case CoefficientSet::Family::kLinearDiffusion:
      break;  // generic kernel consults the reference evaluators
  }

  EnsembleResult out{
      .grid = grid,
      .boundary = config.boundary,
      .preset_name = coeffs.preset_name,
      .master_seed = config.master_seed,
      .weighted = weighted,
      .functionals = config.functionals,
      .levels = config.levels,
      .blow_up = std::vector<std::uint8_t>(n_paths),
      .values = std::vector<double>(n_paths * n_funcs),
      .log_weight = std::vector<double>(n_paths),
      .r2_terminal = std::vector<double>(n_paths),
      .stopped_log_weight = std::vector<double>(n_paths * n_levels),
      .tau_at_end = std::vector<std::uint8_t>(n_paths * n_levels),
      .blow_up_count = 0,
  };
  sh.out = &out;

  const TileFn tile_fn = select_tile_fn(resolve_kernel(coeffs), include_d);

  std::size_t n_threads =
      config.threads > 0
          ? static_cast<std::size_t>(config.threads)
          : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, sh.tiles);

  std::atomic<std::size_t> next_tile{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    Workspace ws(n, n_levels);
    try {
      for (;;) {
        const std::size_t tile =
            next_tile.fetch_add(1, std::memory_order_relaxed);
        if (tile >= sh.tiles) break;
        tile_fn(sh, ws, tile);
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      next_tile.store(sh.tiles, std::memory_order_relaxed);
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::size_t blown = 0;
  for (std::uint8_t f : out.blow_up) blown += f;
  out.blow_up_count = blown;
  if (5 * blown > n_paths) {
    throw ComputeError(
        "ensemble: more than 20% of paths blew up (" + std::to_string(blown) +
        " of " + std::to_string(n_paths) +
        "); the grid is too coarse for these coefficients");
  }
  return out;
}

}  // namespace

std::string FunctionalSpec::name() const {
  switch (kind) {
    case Kind::kPointValue:
      return "point_value_at_" + format_double(x0);
    case Kind::kSpatialMean:
      return "spatial_mean";
    case Kind::kSpatialMax:
      return "spatial_max";
    case Kind::kL2Norm:
      return "l2_norm";
  }
  return "unknown";
}

double evaluate_functional(const FunctionalSpec& spec,
                           std::span<const double> final_row,
                           const Grid& grid) {
  if (final_row.size() != grid.space_cells()) {
    throw ConfigError("evaluate_functional: row size does not match grid");
  }
  switch (spec.kind) {
    case FunctionalSpec::Kind::kPointValue:
      return final_row[grid.nearest_cell(spec.x0)];
    case FunctionalSpec::Kind::kSpatialMean: {
      CompensatedSum sum;
      for (double v : final_row) sum.add(v);
      return sum.value() / static_cast<double>(final_row.size());
    }
    case FunctionalSpec::Kind::kSpatialMax: {
      double best = final_row[0];
      for (double v : final_row) best = std::max(best, v);
      return best;
    }
    case FunctionalSpec::Kind::kL2Norm: {
      CompensatedSum sum;
      for (double v : final_row) sum.add(v * v);
      return std::sqrt(sum.value() * grid.dx());
    }
  }
  throw ConfigError("evaluate_functional: unknown functional kind");
}

double evaluate_functional(const FunctionalSpec& spec, const PathField& path) {
  return evaluate_functional(spec, path.row(path.grid.time_steps()),
                             path.grid);
}

EnsembleResult run_direct(const CoefficientSet& coeffs,
                          const EnsembleConfig& config) {
  return run_ensemble(coeffs, config, /*include_d=*/true, /*weighted=*/false);
}

EnsembleResult run_reweighted(const CoefficientSet& coeffs,
                              const EnsembleConfig& config) {
  return run_ensemble(coeffs, config, /*include_d=*/false, /*weighted=*/true);
}

std::vector<double> tau_coverage(const EnsembleResult& ensemble) {
  const std::size_t n_paths = ensemble.paths();
  const std::size_t n_levels = ensemble.n_levels();
  std::size_t live = 0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    live += ensemble.blow_up[p] == 0 ? 1 : 0;
  }
  if (live == 0) {
    throw ComputeError("tau_coverage: no surviving paths");
  }
  std::vector<double> coverage(n_levels);
  for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
    std::size_t hit = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
      if (ensemble.blow_up[p] == 0 && ensemble.tau_flag(p, lvl)) ++hit;
    }
    coverage[lvl] = static_cast<double>(hit) / static_cast<double>(live);
  }
  return coverage;
}

}  // namespace spde
