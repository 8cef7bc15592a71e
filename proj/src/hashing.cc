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

#include "diffsketch/hashing.h"

#include <string>

#include "diffsketch/error.h"

namespace diffsketch {

RowSeeds DeriveRowSeeds(uint64_t master_seed, uint64_t row) {
  const uint64_t base = 4 * row;
  RowSeeds seeds;
  seeds.index = {SplitMix64At(master_seed, base) | 1, SplitMix64At(master_seed, base + 1),
                 SeedKind::kIndex};
  seeds.sign = {SplitMix64At(master_seed, base + 2) | 1,
                SplitMix64At(master_seed, base + 3), SeedKind::kSign};
  return seeds;
}

uint32_t IndexHash(const RowSeed& seed, uint64_t i, uint32_t k) {
  Require(k >= 1, ErrorCode::kInvalidArgument, "bin count k must be at least 1");
  if (i >= kMaxCoordinate) {
    Fail(ErrorCode::kInvalidArgument, "coordinate index " + std::to_string(i) + " exceeds 2^32 - 1");
  }
  return IndexHashUnchecked(seed, i, k);
}

int SignHash(const RowSeed& seed, uint64_t i) {
  if (i >= kMaxCoordinate) {
    Fail(ErrorCode::kInvalidArgument, "coordinate index " + std::to_string(i) + " exceeds 2^32 - 1");
  }
  return SignHashUnchecked(seed, i);
}

}  // namespace diffsketch
