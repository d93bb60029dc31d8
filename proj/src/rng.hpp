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

#include <array>
#include <cstdint>
#include <span>

namespace spde::rng {

/// Philox 4x32, 10 rounds (Salmon et al., SC 2011). Counter-based: every
/// 128-bit output block is a pure function of (counter, key), so draws for
/// any lattice cell of any path can be produced in any order, on any thread,
/// with identical results.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kBump0 = 0x9E3779B9u;
  static constexpr std::uint32_t kBump1 = 0xBB67AE85u;

  static void round(std::array<std::uint32_t, 4>& ctr,
                    const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
           static_cast<std::uint32_t>(p0)};
  }

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kBump0;
      key[1] += kBump1;
      round(ctr, key);
    }
    return ctr;
  }
};

/// splitmix64 finalizer; used to derive purpose-specific seeds from one
/// master seed (arm seeds, replication seeds, bootstrap seeds).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose) {
  return mix64(master + 0x9E3779B97F4A7C15ull * (purpose + 1));
}

/// Lazy stream of 64-bit draws for one (key, stream, slot) triple.
///
/// The Philox counter packs (slot low 32 | slot high 8 + block index << 8 |
/// stream low 32 | stream high 32); slots must stay below 2^40, which the
/// grid bounds guarantee. Draw n of a given slot is reproducible regardless
/// of how many draws preceded it elsewhere, so any row of any path can be
/// regenerated out of order and across threads.
class DrawStream {
 public:
  DrawStream(std::uint64_t key, std::uint64_t stream, std::uint64_t slot)
      : key_{static_cast<std::uint32_t>(key),
             static_cast<std::uint32_t>(key >> 32)},
        base_{static_cast<std::uint32_t>(slot),
              static_cast<std::uint32_t>((slot >> 32) & 0xFFu),
              static_cast<std::uint32_t>(stream),
              static_cast<std::uint32_t>(stream >> 32)} {}

  std::uint64_t next_u64() {
    if (lane_ == 2) refill();
    return cached_[lane_++];
  }

  /// Uniform on (0,1]; safe under log().
  double next_uniform_pos() {
    return static_cast<double>((next_u64() >> 12) + 1) * 0x1.0p-52;
  }

  /// Uniform on [0,1).
  double next_uniform() {
    return static_cast<double>(next_u64() >> 12) * 0x1.0p-52;
  }

 private:
  void refill() {
    auto ctr = base_;
    ctr[1] |= block_ << 8;
    const auto out = Philox4x32::block(ctr, key_);
    cached_[0] = static_cast<std::uint64_t>(out[0]) |
                 (static_cast<std::uint64_t>(out[1]) << 32);
    cached_[1] = static_cast<std::uint64_t>(out[2]) |
                 (static_cast<std::uint64_t>(out[3]) << 32);
    ++block_;
    lane_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> base_;
  std::array<std::uint64_t, 2> cached_{};
  std::uint32_t block_ = 0;
  unsigned lane_ = 2;
};

/// One standard normal via the 256-layer ziggurat rejection method. Exact
/// (rejection sampling against the true density), consuming a deterministic
/// number of draws from the stream per sample.
double standard_normal(DrawStream& stream);

/// Fills out with consecutive standard normals drawn from the slot `row` of
/// the given stream; out[j] is the j-th sample of that single slot stream.
/// Equivalent to one DrawStream plus repeated standard_normal calls, but
/// batches block generation for throughput.
void fill_standard_normal_row(std::uint64_t key, std::uint64_t stream,
                              std::uint64_t row, std::span<double> out);

}  // namespace spde::rng
