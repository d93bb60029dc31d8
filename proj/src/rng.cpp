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

#include "rng.hpp"

#if defined(__AVX512F__) && defined(__AVX512DQ__)
#include <immintrin.h>
#endif

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spde::rng {
namespace {

constexpr int kLayers = 256;

/// Ziggurat tables for the standard normal (Marsaglia & Tsang layout).
/// width[i] is the layer-i rectangle width prescaled by 2^-52 so that a
/// 52-bit mantissa draw m maps to x = m * width[i]. accept[i] is the
/// largest m accepted without the wedge test. edge_density[i] holds
/// exp(-x_i^2 / 2) at the layer edges, with edge_density[256] = 1 at x = 0.
struct ZigguratTables {
  double width[kLayers];
  std::uint64_t accept[kLayers];
  double edge_density[kLayers + 1];
  double r;
  double inv_r;
};

double gaussian(double x) { return std::exp(-0.5 * x * x); }

/// Integral of exp(-x^2/2) over [r, inf).
double tail_mass(double r) {
  return std::sqrt(std::atan(1.0) * 2.0) * std::erfc(r / std::sqrt(2.0));
}

/// Walks the layer recursion upward from base abscissa r. Returns the
/// density reached after the top layer; the correct r makes this exactly 1.
/// Returns +inf if the recursion overshoots early (r too small).
double layer_closure(double r, double* edges = nullptr) {
  const double v = r * gaussian(r) + tail_mass(r);
  double x = r;
  double y = gaussian(r);
  if (edges != nullptr) {
    edges[0] = v / gaussian(r);
    edges[1] = r;
  }
  for (int i = 1; i < kLayers; ++i) {
    y += v / x;
    if (y >= 1.0) {
      if (i < kLayers - 1) return std::numeric_limits<double>::infinity();
      x = 0.0;
    } else {
      x = std::sqrt(-2.0 * std::log(y));
    }
    if (edges != nullptr) edges[i + 1] = x;
  }
  return y;
}

ZigguratTables build_tables() {
  double lo = 3.0;
  double hi = 4.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-16; ++iter) {
    const double mid = 0.5 * (lo + hi);
    // layer_closure decreases in r; root is where it crosses 1.
    (layer_closure(mid) > 1.0 ? lo : hi) = mid;
  }
  const double r = 0.5 * (lo + hi);

  double edges[kLayers + 1];
  const double closure = layer_closure(r, edges);
  if (std::abs(closure - 1.0) > 1e-9 || r < 3.64 || r > 3.67) {
    throw std::logic_error("ziggurat table construction failed to close");
  }

  ZigguratTables t{};
  t.r = r;
  t.inv_r = 1.0 / r;
  for (int i = 0; i < kLayers; ++i) {
    t.width[i] = edges[i] * 0x1.0p-52;
    t.accept[i] =
        static_cast<std::uint64_t>((edges[i + 1] / edges[i]) * 0x1.0p52);
  }
  for (int i = 1; i <= kLayers; ++i) t.edge_density[i] = gaussian(edges[i]);
  t.edge_density[0] = gaussian(edges[0]);
  t.edge_density[kLayers] = 1.0;
  return t;
}

const ZigguratTables& ziggurat() {
  static const ZigguratTables tables = build_tables();
  return tables;
}

/// Ziggurat consumption shared by the scalar and batched entry points; both
/// must map an identical u64 sequence to identical samples.
template <class Source>
double normal_from(Source& src, const ZigguratTables& t) {
  for (;;) {
    const std::uint64_t u = src.next_u64();
    const unsigned layer = static_cast<unsigned>(u & 255u);
    const std::uint64_t m = u >> 12;
    const double sign = (u & 256u) != 0 ? -1.0 : 1.0;
    if (m < t.accept[layer]) {
      return sign * (static_cast<double>(m) * t.width[layer]);
    }
    if (layer == 0) {
      // Exact tail sample beyond r (Marsaglia's exponential wrap).
      double xs;
      double ys;
      do {
        xs = -std::log(
                 static_cast<double>((src.next_u64() >> 12) + 1) * 0x1.0p-52) *
             t.inv_r;
        ys = -std::log(
            static_cast<double>((src.next_u64() >> 12) + 1) * 0x1.0p-52);
      } while (ys + ys < xs * xs);
      return sign * (t.r + xs);
    }
    const double x = static_cast<double>(m) * t.width[layer];
    const double u2 = static_cast<double>(src.next_u64() >> 12) * 0x1.0p-52;
    const double height =
        t.edge_density[layer] +
        u2 * (t.edge_density[layer + 1] - t.edge_density[layer]);
    if (height < gaussian(x)) return sign * x;
  }
}

#if defined(__AVX512F__) && defined(__AVX512DQ__)

/// Eight Philox blocks at once. Each 64-bit lane carries one 32-bit counter
/// word (high halves kept zero) so vpmuludq yields the full widening
/// products. Bit-exact with Philox4x32::block per lane.
void philox_blocks8(const std::array<std::uint32_t, 2>& key,
                    const std::array<std::uint32_t, 4>& base,
                    std::uint32_t first_block, std::uint64_t* out) {
  const __m512i mul0 = _mm512_set1_epi64(Philox4x32::kMul0);
  const __m512i mul1 = _mm512_set1_epi64(Philox4x32::kMul1);
  const __m512i mask32 = _mm512_set1_epi64(0xFFFFFFFFll);
  const __m512i lane = _mm512_set_epi64(7, 6, 5, 4, 3, 2, 1, 0);

  __m512i c0 = _mm512_set1_epi64(base[0]);
  __m512i c1 = _mm512_or_si512(
      _mm512_set1_epi64(base[1]),
      _mm512_slli_epi64(
          _mm512_add_epi64(_mm512_set1_epi64(first_block), lane), 8));
  __m512i c2 = _mm512_set1_epi64(base[2]);
  __m512i c3 = _mm512_set1_epi64(base[3]);

  std::uint32_t k0 = key[0];
  std::uint32_t k1 = key[1];
  for (int r = 0;; ++r) {
    const __m512i p0 = _mm512_mul_epu32(c0, mul0);
    const __m512i p1 = _mm512_mul_epu32(c2, mul1);
    const __m512i k0v = _mm512_set1_epi64(k0);
    const __m512i k1v = _mm512_set1_epi64(k1);
    const __m512i n0 = _mm512_xor_si512(_mm512_srli_epi64(p1, 32),
                                        _mm512_xor_si512(c1, k0v));
    const __m512i n1 = _mm512_and_si512(p1, mask32);
    const __m512i n2 = _mm512_xor_si512(_mm512_srli_epi64(p0, 32),
                                        _mm512_xor_si512(c3, k1v));
    const __m512i n3 = _mm512_and_si512(p0, mask32);
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    if (r == 9) break;
    k0 += Philox4x32::kBump0;
    k1 += Philox4x32::kBump1;
  }

  const __m512i first = _mm512_or_si512(c0, _mm512_slli_epi64(c1, 32));
  const __m512i second = _mm512_or_si512(c2, _mm512_slli_epi64(c3, 32));
  const __m512i idx_lo = _mm512_set_epi64(11, 3, 10, 2, 9, 1, 8, 0);
  const __m512i idx_hi = _mm512_set_epi64(15, 7, 14, 6, 13, 5, 12, 4);
  _mm512_storeu_si512(out, _mm512_permutex2var_epi64(first, idx_lo, second));
  _mm512_storeu_si512(out + 8,
                      _mm512_permutex2var_epi64(first, idx_hi, second));
}

/// Generates `count` consecutive Philox blocks (block indices first_block,
/// first_block + 1, ...) into out, two u64 per block.
void philox_blocks(const std::array<std::uint32_t, 2>& key,
                   const std::array<std::uint32_t, 4>& base,
                   std::uint32_t first_block, unsigned count,
                   std::uint64_t* out) {
  unsigned done = 0;
  for (; done + 8 <= count; done += 8) {
    philox_blocks8(key, base, first_block + done, out + 2 * done);
  }
  if (done < count) {
    alignas(64) std::uint64_t tmp[16];
    philox_blocks8(key, base, first_block + done, tmp);
    for (unsigned i = 0; i < 2 * (count - done); ++i) out[2 * done + i] = tmp[i];
  }
}

#else

/// Generates `count` consecutive Philox blocks (block indices first_block,
/// first_block + 1, ...) into out, two u64 per block.
void philox_blocks(const std::array<std::uint32_t, 2>& key,
                   const std::array<std::uint32_t, 4>& base,
                   std::uint32_t first_block, unsigned count,
                   std::uint64_t* out) {
  for (unsigned b = 0; b < count; ++b) {
    auto ctr = base;
    ctr[1] |= (first_block + b) << 8;
    const auto o = Philox4x32::block(ctr, key);
    out[2 * b] = static_cast<std::uint64_t>(o[0]) |
                 (static_cast<std::uint64_t>(o[1]) << 32);
    out[2 * b + 1] = static_cast<std::uint64_t>(o[2]) |
                     (static_cast<std::uint64_t>(o[3]) << 32);
  }
}

#endif

/// Buffered u64 source over one slot. Generates Philox blocks in batches so
/// the ten-round multiply chains of independent blocks overlap; emits the
/// exact sequence a DrawStream on the same (key, stream, slot) would.
class BufferedSlotSource {
 public:
  BufferedSlotSource(std::uint64_t key, std::uint64_t stream,
                     std::uint64_t slot)
      : key_{static_cast<std::uint32_t>(key),
             static_cast<std::uint32_t>(key >> 32)},
        base_{static_cast<std::uint32_t>(slot),
              static_cast<std::uint32_t>((slot >> 32) & 0xFFu),
              static_cast<std::uint32_t>(stream),
              static_cast<std::uint32_t>(stream >> 32)} {}

  /// Returns a pointer to `count` buffered draws without consuming them;
  /// count must fit the buffer.
  const std::uint64_t* peek(unsigned count) {
    ensure(count);
    return buf_ + pos_;
  }

  void advance(unsigned count) { pos_ += count; }

  /// Tops the buffer up to at least `values` pending draws (buffer space
  /// permitting) without discarding what is already queued, so the emitted
  /// sequence never skips a draw.
  void ensure(unsigned values) {
    const unsigned have = end_ - pos_;
    if (have >= values) return;
    for (unsigned i = 0; i < have; ++i) buf_[i] = buf_[pos_ + i];
    pos_ = 0;
    end_ = have;
    const unsigned needed = (values - have + 1) / 2;
    const unsigned cap = (2 * kMaxBlocks - end_) / 2;
    // Round refills up to the 8-block SIMD granule so no vector work is
    // discarded; the cap always covers the caller's contract (values <= 64).
    unsigned blocks = std::min((needed + 7u) & ~7u, cap);
    if (blocks < needed) blocks = needed;
    philox_blocks(key_, base_, next_block_, blocks, buf_ + end_);
    next_block_ += blocks;
    end_ += 2 * blocks;
  }

  std::uint64_t next_u64() {
    if (pos_ == end_) ensure(4);
    return buf_[pos_++];
  }

 private:
  static constexpr unsigned kMaxBlocks = 40;

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> base_;
  std::uint64_t buf_[2 * kMaxBlocks];
  unsigned pos_ = 0;
  unsigned end_ = 0;
  std::uint32_t next_block_ = 0;
};

}  // namespace

double standard_normal(DrawStream& stream) {
  return normal_from(stream, ziggurat());
}

void fill_standard_normal_row(std::uint64_t key, std::uint64_t stream,
                              std::uint64_t row, std::span<double> out) {
  const ZigguratTables& t = ziggurat();
  BufferedSlotSource src(key, stream, row);
  std::size_t j = 0;
#if defined(__AVX512F__) && defined(__AVX512DQ__)
  // Optimistic vector fast path: try eight draws as eight samples; if every
  // lane passes the no-wedge accept test this matches the scalar algorithm
  // bit for bit (sign flip and m * width are exact), otherwise reprocess the
  // group sequentially from the same buffered draws.
  const __m512i byte_mask = _mm512_set1_epi64(255);
  const __m512i sign_bit = _mm512_set1_epi64(256);
  src.ensure(static_cast<unsigned>(std::min<std::size_t>(out.size() + 2, 64)));
  while (j + 8 <= out.size()) {
    const std::uint64_t* p = src.peek(8);
    const __m512i u = _mm512_loadu_si512(p);
    const __m512i layer = _mm512_and_si512(u, byte_mask);
    const __m512i m = _mm512_srli_epi64(u, 12);
    const __m512i accept = _mm512_i64gather_epi64(
        layer, reinterpret_cast<const long long*>(t.accept), 8);
    if (_mm512_cmplt_epu64_mask(m, accept) != 0xFF) {
      for (int i = 0; i < 8; ++i) out[j++] = normal_from(src, t);
      continue;
    }
    const __m512d width = _mm512_i64gather_pd(layer, t.width, 8);
    const __m512d x = _mm512_mul_pd(_mm512_cvtepu64_pd(m), width);
    const __m512i flip = _mm512_slli_epi64(_mm512_and_si512(u, sign_bit), 55);
    _mm512_storeu_pd(out.data() + j,
                     _mm512_castsi512_pd(_mm512_xor_si512(
                         _mm512_castpd_si512(x), flip)));
    src.advance(8);
    j += 8;
  }
  while (j < out.size()) out[j++] = normal_from(src, t);
#else
  while (j < out.size()) {
    const unsigned batch =
        static_cast<unsigned>(std::min<std::size_t>(out.size() - j, 64));
    src.ensure(batch);
    for (unsigned i = 0; i < batch; ++i) out[j++] = normal_from(src, t);
  }
#endif
}

}  // namespace spde::rng
