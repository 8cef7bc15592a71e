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

#ifndef DIFFSKETCH_MODEL_H_
#define DIFFSKETCH_MODEL_H_

#include <cstddef>
#include <span>
#include <vector>

#include "diffsketch/data.h"

namespace diffsketch {

enum class LossKind { kLeastSquares, kLogistic };

// Both kinds are convex in the weights. Least squares uses one weight per
// feature; multiclass logistic uses a classes x feature_dim weight block
// (class-major) followed by one bias per class.
struct LossSpec {
  LossKind kind = LossKind::kLeastSquares;
  double l2 = 0.0;
  size_t classes = 0;  // logistic only
};

size_t ParameterCount(const LossSpec& loss, size_t feature_dim);

// Batch-average loss plus (l2/2)||w||^2. An empty `batch` means every sample.
//   least squares: (1/2B) sum (<w, x> - y)^2
//   logistic:      (1/B) sum -log softmax(W x + b)_y
double Loss(std::span<const double> w, const LossSpec& loss, const Dataset& data,
            std::span<const size_t> batch = {});

// Exact gradient of Loss() over the same batch.
std::vector<double> Gradient(std::span<const double> w, const LossSpec& loss,
                             const Dataset& data, std::span<const size_t> batch = {});

// Fraction of argmax predictions matching the label (logistic only).
double Accuracy(std::span<const double> w, const LossSpec& loss, const Dataset& data);

// Minimizer of the least-squares objective over all of `data`, solving
// (X^T X / N + l2 I) w = X^T y / N.
std::vector<double> LeastSquaresOptimum(const Dataset& data, double l2);

// Zeroes the floor(fraction * n) coordinates of `queried` that disagree most
// with `local` (largest |queried_i - local_i|, lower index first on ties).
std::vector<double> ErrorCorrect(std::span<const double> queried, std::span<const double> local,
                                 double fraction);

// c / sqrt(round), rounds counted from 1.
double StepSize(size_t round, double c);

}  // namespace diffsketch

#endif  // DIFFSKETCH_MODEL_H_
