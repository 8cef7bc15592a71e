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

#ifndef DIFFSKETCH_RANDOM_H_
#define DIFFSKETCH_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <random>

#include "diffsketch/hashing.h"

namespace diffsketch {

using Rng = std::mt19937_64;

// Stream tags keep the generators of different subsystems apart even when
// their numeric ids coincide.
enum class Stream : uint64_t {
  kData = 1,
  kBatch = 2,
  kPadding = 3,
  kLaplace = 4,
  kDeviceSampling = 5,
  kSketchSeed = 6,
  kBench = 7,
  kHistogram = 8,
};

// Folds (seed, stream, ids...) into one 64-bit word. Each worker's stream is
// keyed by (worker, round), so results never depend on thread scheduling.
inline uint64_t StreamSeed(uint64_t seed, Stream stream,
                           std::initializer_list<uint64_t> ids = {}) {
  uint64_t h = Mix64(seed ^ Mix64(static_cast<uint64_t>(stream) * kGoldenGamma));
  for (uint64_t id : ids) h = Mix64(h + kGoldenGamma + Mix64(id));
  return h;
}

inline Rng MakeRng(uint64_t seed, Stream stream, std::initializer_list<uint64_t> ids = {}) {
  return Rng(StreamSeed(seed, stream, ids));
}

}  // namespace diffsketch

#endif  // DIFFSKETCH_RANDOM_H_
