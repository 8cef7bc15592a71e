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

#ifndef DIFFSKETCH_DATA_H_
#define DIFFSKETCH_DATA_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "diffsketch/error.h"

namespace diffsketch {

// Samples stored row-major. Labels are real targets for regression and class
// indices (stored as doubles) for classification.
struct Dataset {
  size_t feature_dim = 0;
  std::vector<double> features;
  std::vector<double> labels;

  size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(size_t i) const {
    return {features.data() + i * feature_dim, feature_dim};
  }
  void Append(std::span<const double> x, double y);
};

enum class PartitionKind { kIid, kLabelSkew, kDirichlet };

struct Partition {
  PartitionKind kind = PartitionKind::kIid;
  uint64_t seed = 0;
  size_t classes = 0;  // 0 for regression
  std::vector<Dataset> workers;

  size_t feature_dim() const { return workers.empty() ? 0 : workers.front().feature_dim; }
  size_t total_samples() const;
  Dataset Pooled() const;
};

struct RegressionData {
  Partition partition;
  std::vector<double> true_weights;
};

// Features ~ N(0, 1), y = <w*, x> + N(0, noise_sd^2), w* ~ N(0, 1); IID split.
RegressionData SynthRegression(size_t workers, size_t samples_per_worker, size_t feature_dim,
                               double noise_sd, uint64_t seed);

struct LabelSkew {
  size_t classes_per_worker = 1;
};
struct DirichletSkew {
  double concentration = 0.5;
};
using Skew = std::variant<LabelSkew, DirichletSkew>;

// Distance of each class mean from the origin. At 784 features and 10 classes
// a centralized logistic model clears 90% test accuracy.
inline constexpr double kDefaultSeparation = 4.0;

struct ClassificationSpec {
  size_t workers = 10;
  size_t samples_per_worker = 200;
  size_t feature_dim = 784;
  size_t classes = 10;
  Skew skew = LabelSkew{10};
  double separation = kDefaultSeparation;
  size_t test_samples = 2000;
  uint64_t seed = 0;
};

struct ClassificationData {
  Partition partition;
  Dataset test;
};

// x = mu_y + N(0, I) with class means mu_c = separation * (random unit
// vector). LabelSkew restricts worker w to classes {w*c, ..., w*c+c-1} mod
// classes; DirichletSkew draws per-worker class proportions from
// Dir(concentration). The test set is class-balanced in expectation.
ClassificationData SynthClassification(const ClassificationSpec& spec);

// Raised by LoadCsv for malformed content; row is the 1-based data row (the
// header is row 0) and column is 1-based. Zero means "not applicable".
class CsvError : public Error {
 public:
  CsvError(ErrorCode code, const std::string& message, size_t row, size_t column)
      : Error(code, message), row_(row), column_(column) {}
  size_t row() const { return row_; }
  size_t column() const { return column_; }

 private:
  size_t row_;
  size_t column_;
};

// Comma-separated numeric table with a header row. `label_column` is matched
// against header names first, then read as a 0-based column index.
// Errors: io-error (missing file), parse-error with (row, column) for
// non-numeric or ragged rows, invalid-argument for an unknown label column.
Dataset LoadCsv(const std::string& path, const std::string& label_column);

// Writes x0..x{d-1},label with shortest round-trip decimal formatting.
void WriteCsv(const std::string& path, const Dataset& data);

struct Histogram {
  double lo = 0;
  double hi = 0;
  std::vector<uint64_t> counts;
  uint64_t n = 0;
  double mean = 0;
  double variance = 0;  // unbiased
  double excess_kurtosis = 0;  // population moments; 0 for constant input
};

// Equal-width bins over [min, max]; a constant vector lands in bin 0.
Histogram GradientHistogram(std::span<const double> g, size_t bins);

}  // namespace diffsketch

#endif  // DIFFSKETCH_DATA_H_
