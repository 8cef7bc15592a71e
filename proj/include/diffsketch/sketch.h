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

#ifndef DIFFSKETCH_SKETCH_H_
#define DIFFSKETCH_SKETCH_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffsketch/hashing.h"

namespace diffsketch {

// Shape of a t x k counter table compressing vectors of length n.
struct SketchDims {
  uint32_t t = 1;
  uint32_t k = 1;
  uint64_t n = 1;

  // Throws invalid-argument unless t, k, n >= 1 and n <= 2^32.
  void Validate() const;
  size_t cells() const { return static_cast<size_t>(t) * k; }

  friend bool operator==(const SketchDims&, const SketchDims&) = default;
};

struct TableShape {
  uint32_t t = 1;
  uint32_t k = 1;
};

// Table shape reaching additive error mu * ||g||_2 with probability 1 - delta:
// t = ceil(ln(1/delta)) rounded up to odd, k = ceil(e / mu^2).
TableShape DimsForError(double mu, double delta);

// n / (t * k).
double CompressionRatio(const SketchDims& dims);

// Count Sketch over real vectors. Two sketches can be merged iff they share
// dims and master seed; merging is then counter-wise addition, and the table
// of a sum equals the sum of tables.
//
// Not internally synchronized: mutation needs exclusive access, const methods
// may run concurrently.
class CountSketch {
 public:
  CountSketch(SketchDims dims, uint64_t master_seed);

  // Rebuilds a sketch around an existing table (t*k values, row-major).
  static CountSketch FromCounters(SketchDims dims, uint64_t master_seed,
                                  std::vector<double> counters);

  const SketchDims& dims() const { return dims_; }
  uint64_t master_seed() const { return master_seed_; }
  const RowSeeds& row_seeds(uint32_t row) const { return rows_[row]; }

  std::span<const double> counters() const { return counters_; }
  std::span<double> mutable_counters() { return counters_; }
  double counter(uint32_t row, uint32_t bin) const {
    return counters_[static_cast<size_t>(row) * dims_.k + bin];
  }

  // S[j][h_j(i)] += sign_j(i) * g_i for every row j. g must have length n and
  // finite entries.
  void Encode(std::span<const double> g);

  // Median over rows of sign_j(i) * S[j][h_j(i)]. With an even row count the
  // two middle values are averaged.
  double Query(uint64_t i) const;

  std::vector<double> QueryAll() const { return QueryPrefix(dims_.n); }

  // Estimates for coordinates [0, count); used to drop padding coordinates.
  std::vector<double> QueryPrefix(uint64_t count) const;

  // Sign-corrected reading of one row for coordinate i, i.e. the single-row
  // estimator whose median Query() reports.
  double RowEstimate(uint32_t row, uint64_t i) const;

  void MergeFrom(const CountSketch& other);
  void Scale(double c);

  // Empty string when compatible, else the name of the first differing field.
  std::string IncompatibleField(const CountSketch& other) const;

  friend bool operator==(const CountSketch& a, const CountSketch& b) {
    return a.dims_ == b.dims_ && a.master_seed_ == b.master_seed_ &&
           a.counters_ == b.counters_;
  }

 private:
  SketchDims dims_;
  uint64_t master_seed_;
  std::vector<RowSeeds> rows_;
  std::vector<double> counters_;
};

CountSketch Merge(const CountSketch& a, const CountSketch& b);
CountSketch Scaled(const CountSketch& sketch, double c);

// Median with the even-count convention used by Query(). Reorders `values`.
double MedianInPlace(std::span<double> values);

// Wire format, little-endian, no padding:
//   "DSK1" | version u16 | t u32 | k u32 | n u64 | master_seed u64 |
//   t*k binary64 counters, row-major.
inline constexpr uint16_t kWireVersion = 1;
inline constexpr size_t kWireHeaderSize = 4 + 2 + 4 + 4 + 8 + 8;

size_t SerializedSize(const SketchDims& dims);
std::vector<uint8_t> Serialize(const CountSketch& sketch);

// Rejects bad magic, unknown versions, invalid dims, short or over-long
// payloads and non-finite counters; never returns a partially parsed sketch.
CountSketch Deserialize(std::span<const uint8_t> bytes);

void WriteSketchFile(const std::string& path, const CountSketch& sketch);
CountSketch ReadSketchFile(const std::string& path);

}  // namespace diffsketch

#endif  // DIFFSKETCH_SKETCH_H_
