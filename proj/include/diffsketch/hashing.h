// Copyright 2026 The DiffSketch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DIFFSKETCH_HASHING_H_
#define DIFFSKETCH_HASHING_H_

#include <cstdint>
#include <utility>

namespace diffsketch {

// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
constexpr uint64_t Mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// The j-th output (0-based) of a SplitMix64 generator seeded with `seed`.
constexpr uint64_t SplitMix64At(uint64_t seed, uint64_t j) {
  return Mix64(seed + (j + 1) * kGoldenGamma);
}

enum class SeedKind : uint8_t { kIndex, kSign };

// Parameters of one multiply-shift function h(x) = (a*x + b) mod 2^64.
struct RowSeed {
  uint64_t a = 1;  // odd
  uint64_t b = 0;
  SeedKind kind = SeedKind::kIndex;

  friend bool operator==(const RowSeed&, const RowSeed&) = default;
};

struct RowSeeds {
  RowSeed index;
  RowSeed sign{.kind = SeedKind::kSign};

  friend bool operator==(const RowSeeds&, const RowSeeds&) = default;
};

// Row `row` of a sketch seeded with `master_seed` takes outputs 4*row .. 4*row+3
// of SplitMix64(master_seed): (index.a, index.b, sign.a, sign.b), with both
// multipliers forced odd.
RowSeeds DeriveRowSeeds(uint64_t master_seed, uint64_t row);

// Largest coordinate index the hash family accepts is kMaxCoordinate - 1.
inline constexpr uint64_t kMaxCoordinate = uint64_t{1} << 32;

// Bin of coordinate `i` in [0, k). The top 32 bits of (a*i + b) mod 2^64 form
// a strongly universal hash of the 32-bit input; that word w is then mapped to
// floor(w * k / 2^32). Throws invalid-argument on k == 0 or i >= 2^32.
uint32_t IndexHash(const RowSeed& seed, uint64_t i, uint32_t k);

// +1 or -1 from the top bit of (a*i + b) mod 2^64.
int SignHash(const RowSeed& seed, uint64_t i);

// Unchecked variants for the encode/query hot loops; callers guarantee
// k >= 1 and i < 2^32.
inline uint32_t IndexHashUnchecked(const RowSeed& seed, uint64_t i, uint32_t k) {
  const uint64_t word = (seed.a * i + seed.b) >> 32;
  return static_cast<uint32_t>((word * k) >> 32);
}

inline int SignHashUnchecked(const RowSeed& seed, uint64_t i) {
  return ((seed.a * i + seed.b) >> 63) ? -1 : 1;
}

}  // namespace diffsketch

#endif  // DIFFSKETCH_HASHING_H_
