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

#include "diffsketch/sketch.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "diffsketch/error.h"

namespace diffsketch {

void SketchDims::Validate() const {
  Require(t >= 1, ErrorCode::kInvalidArgument, "sketch row count t must be at least 1");
  Require(k >= 1, ErrorCode::kInvalidArgument, "sketch bin count k must be at least 1");
  Require(n >= 1, ErrorCode::kInvalidArgument, "input dimension n must be at least 1");
  Require(n <= kMaxCoordinate, ErrorCode::kInvalidArgument,
          "input dimension n must not exceed 2^32");
}

TableShape DimsForError(double mu, double delta) {
  Require(mu > 0 && mu < 1, ErrorCode::kInvalidArgument, "mu must lie in (0, 1)");
  Require(delta > 0 && delta < 1, ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  auto t = static_cast<uint64_t>(std::ceil(std::log(1.0 / delta)));
  t = std::max<uint64_t>(t, 1);
  if (t % 2 == 0) ++t;
  const double k = std::ceil(std::numbers::e / (mu * mu));
  Require(k <= 4294967295.0 && t <= 4294967295ULL, ErrorCode::kInvalidArgument,
          "requested accuracy needs a table larger than 2^32 bins per row");
  return {static_cast<uint32_t>(t), static_cast<uint32_t>(k)};
}

double CompressionRatio(const SketchDims& dims) {
  dims.Validate();
  return static_cast<double>(dims.n) / (static_cast<double>(dims.t) * dims.k);
}

CountSketch::CountSketch(SketchDims dims, uint64_t master_seed)
    : dims_(dims), master_seed_(master_seed) {
  dims_.Validate();
  rows_.reserve(dims_.t);
  for (uint32_t j = 0; j < dims_.t; ++j) rows_.push_back(DeriveRowSeeds(master_seed_, j));
  counters_.assign(dims_.cells(), 0.0);
}

CountSketch CountSketch::FromCounters(SketchDims dims, uint64_t master_seed,
                                      std::vector<double> counters) {
  CountSketch sketch(dims, master_seed);
  Require(counters.size() == sketch.counters_.size(), ErrorCode::kDimensionMismatch,
          "expected " + std::to_string(sketch.counters_.size()) + " counters, got " +
              std::to_string(counters.size()));
  sketch.counters_ = std::move(counters);
  return sketch;
}

void CountSketch::Encode(std::span<const double> g) {
  Require(g.size() == dims_.n, ErrorCode::kDimensionMismatch,
          "input has length " + std::to_string(g.size()) + ", sketch expects " +
              std::to_string(dims_.n));
  for (size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      Fail(ErrorCode::kInvalidArgument, "non-finite input at coordinate " + std::to_string(i));
    }
  }
  // Hot loop: one pass per row keeps that row's k counters in cache.
  for (uint32_t j = 0; j < dims_.t; ++j) {
    const RowSeeds& seeds = rows_[j];
    double* row = counters_.data() + static_cast<size_t>(j) * dims_.k;
    for (size_t i = 0; i < g.size(); ++i) {
      if (g[i] == 0.0) continue;
      const uint32_t bin = IndexHashUnchecked(seeds.index, i, dims_.k);
      row[bin] += SignHashUnchecked(seeds.sign, i) * g[i];
    }
  }
}

double CountSketch::RowEstimate(uint32_t row, uint64_t i) const {
  Require(row < dims_.t, ErrorCode::kIndexOutOfBounds, "row out of range");
  if (i >= dims_.n) {
    Fail(ErrorCode::kIndexOutOfBounds,
         "coordinate " + std::to_string(i) + " outside [0, " + std::to_string(dims_.n) + ")");
  }
  const RowSeeds& seeds = rows_[row];
  return SignHashUnchecked(seeds.sign, i) * counter(row, IndexHashUnchecked(seeds.index, i, dims_.k));
}

double MedianInPlace(std::span<double> values) {
  Require(!values.empty(), ErrorCode::kInvalidArgument, "median of an empty set");
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return (lower + upper) / 2;
}

double CountSketch::Query(uint64_t i) const {
  if (i >= dims_.n) {
    Fail(ErrorCode::kIndexOutOfBounds,
         "coordinate " + std::to_string(i) + " outside [0, " + std::to_string(dims_.n) + ")");
  }
  std::vector<double> reads(dims_.t);
  for (uint32_t j = 0; j < dims_.t; ++j) {
    const RowSeeds& seeds = rows_[j];
    reads[j] = SignHashUnchecked(seeds.sign, i) * counter(j, IndexHashUnchecked(seeds.index, i, dims_.k));
  }
  return MedianInPlace(reads);
}

std::vector<double> CountSketch::QueryPrefix(uint64_t count) const {
  Require(count <= dims_.n, ErrorCode::kIndexOutOfBounds,
          "prefix length exceeds sketch dimension");
  std::vector<double> out(count);
  std::vector<double> reads(dims_.t);
  for (uint64_t i = 0; i < count; ++i) {
    for (uint32_t j = 0; j < dims_.t; ++j) {
      const RowSeeds& seeds = rows_[j];
      reads[j] = SignHashUnchecked(seeds.sign, i) *
                 counter(j, IndexHashUnchecked(seeds.index, i, dims_.k));
    }
    out[i] = MedianInPlace(reads);
  }
  return out;
}

std::string CountSketch::IncompatibleField(const CountSketch& other) const {
  if (dims_.t != other.dims_.t) return "t";
  if (dims_.k != other.dims_.k) return "k";
  if (dims_.n != other.dims_.n) return "n";
  if (master_seed_ != other.master_seed_) return "master_seed";
  return {};
}

void CountSketch::MergeFrom(const CountSketch& other) {
  const std::string field = IncompatibleField(other);
  Require(field.empty(), ErrorCode::kMergeIncompatible, "sketches differ in " + field);
  for (size_t c = 0; c < counters_.size(); ++c) counters_[c] += other.counters_[c];
}

void CountSketch::Scale(double c) {
  Require(std::isfinite(c), ErrorCode::kInvalidArgument, "scale factor must be finite");
  for (double& v : counters_) v *= c;
}

CountSketch Merge(const CountSketch& a, const CountSketch& b) {
  CountSketch out = a;
  out.MergeFrom(b);
  return out;
}

CountSketch Scaled(const CountSketch& sketch, double c) {
  CountSketch out = sketch;
  out.Scale(c);
  return out;
}

namespace {

template <typename T>
void PutLe(std::vector<uint8_t>& out, T value) {
  for (size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<uint8_t>(static_cast<uint64_t>(value) >> (8 * b)));
  }
}

template <typename T>
T GetLe(std::span<const uint8_t> bytes, size_t offset) {
  uint64_t v = 0;
  for (size_t b = 0; b < sizeof(T); ++b) v |= static_cast<uint64_t>(bytes[offset + b]) << (8 * b);
  return static_cast<T>(v);
}

constexpr uint8_t kMagic[4] = {'D', 'S', 'K', '1'};

}  // namespace

size_t SerializedSize(const SketchDims& dims) {
  return kWireHeaderSize + 8 * dims.cells();
}

std::vector<uint8_t> Serialize(const CountSketch& sketch) {
  const SketchDims& d = sketch.dims();
  std::vector<uint8_t> out;
  out.reserve(SerializedSize(d));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  PutLe<uint16_t>(out, kWireVersion);
  PutLe<uint32_t>(out, d.t);
  PutLe<uint32_t>(out, d.k);
  PutLe<uint64_t>(out, d.n);
  PutLe<uint64_t>(out, sketch.master_seed());
  for (double v : sketch.counters()) PutLe<uint64_t>(out, std::bit_cast<uint64_t>(v));
  return out;
}

CountSketch Deserialize(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4) Fail(ErrorCode::kTruncated, "input shorter than the magic");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    Fail(ErrorCode::kBadMagic, "expected \"DSK1\"");
  }
  if (bytes.size() < kWireHeaderSize) Fail(ErrorCode::kTruncated, "header incomplete");
  const auto version = GetLe<uint16_t>(bytes, 4);
  if (version != kWireVersion) {
    Fail(ErrorCode::kUnsupportedVersion, "format version " + std::to_string(version));
  }
  SketchDims dims;
  dims.t = GetLe<uint32_t>(bytes, 6);
  dims.k = GetLe<uint32_t>(bytes, 10);
  dims.n = GetLe<uint64_t>(bytes, 14);
  const auto seed = GetLe<uint64_t>(bytes, 22);
  if (dims.t == 0 || dims.k == 0 || dims.n == 0 || dims.n > kMaxCoordinate) {
    Fail(ErrorCode::kMalformed, "header carries invalid dimensions");
  }
  const size_t payload = bytes.size() - kWireHeaderSize;
  // t and k are 32-bit, so t*k fits in 64 bits; the byte count may not.
  const uint64_t cells = static_cast<uint64_t>(dims.t) * dims.k;
  if (payload % 8 != 0 || payload / 8 < cells) {
    Fail(ErrorCode::kTruncated, "payload holds " + std::to_string(payload) +
                                    " bytes, header announces " + std::to_string(cells) +
                                    " counters");
  }
  if (payload / 8 > cells) Fail(ErrorCode::kMalformed, "trailing bytes after counters");
  std::vector<double> counters(cells);
  for (size_t c = 0; c < cells; ++c) {
    counters[c] = std::bit_cast<double>(GetLe<uint64_t>(bytes, kWireHeaderSize + 8 * c));
    if (!std::isfinite(counters[c])) {
      Fail(ErrorCode::kMalformed, "non-finite counter at index " + std::to_string(c));
    }
  }
  return CountSketch::FromCounters(dims, seed, std::move(counters));
}

void WriteSketchFile(const std::string& path, const CountSketch& sketch) {
  const std::vector<uint8_t> bytes = Serialize(sketch);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path);
}

CountSketch ReadSketchFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Deserialize(bytes);
}

}  // namespace diffsketch
