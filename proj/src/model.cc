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

#include "diffsketch/model.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace diffsketch {

namespace {

void CheckShapes(std::span<const double> w, const LossSpec& loss, const Dataset& data) {
  Require(data.feature_dim > 0, ErrorCode::kInvalidArgument, "dataset has no features");
  if (loss.kind == LossKind::kLogistic) {
    Require(loss.classes >= 2, ErrorCode::kInvalidArgument, "logistic loss needs >= 2 classes");
  }
  Require(w.size() == ParameterCount(loss, data.feature_dim), ErrorCode::kInvalidArgument,
          "weight vector has length " + std::to_string(w.size()) + ", model expects " +
              std::to_string(ParameterCount(loss, data.feature_dim)));
}

// Resolves an empty batch to all indices.
std::vector<size_t> ResolveBatch(std::span<const size_t> batch, const Dataset& data) {
  std::vector<size_t> out(batch.begin(), batch.end());
  if (out.empty()) {
    out.resize(data.size());
    std::iota(out.begin(), out.end(), size_t{0});
  }
  Require(!out.empty(), ErrorCode::kInvalidArgument, "batch is empty");
  for (size_t i : out) {
    Require(i < data.size(), ErrorCode::kIndexOutOfBounds, "batch index out of range");
  }
  return out;
}

// Softmax probabilities for one sample; returns the log-partition.
double Softmax(std::span<const double> w, size_t classes, std::span<const double> x,
               std::vector<double>& probs) {
  const size_t d = x.size();
  probs.resize(classes);
  for (size_t c = 0; c < classes; ++c) {
    double z = w[classes * d + c];
    const double* wc = w.data() + c * d;
    for (size_t j = 0; j < d; ++j) z += wc[j] * x[j];
    probs[c] = z;
  }
  const double zmax = *std::max_element(probs.begin(), probs.end());
  double total = 0;
  for (double& p : probs) total += (p = std::exp(p - zmax));
  for (double& p : probs) p /= total;
  return zmax + std::log(total);
}

size_t LabelIndex(double y, size_t classes) {
  Require(y >= 0 && y < static_cast<double>(classes) && y == std::floor(y),
          ErrorCode::kInvalidArgument, "label is not a class index");
  return static_cast<size_t>(y);
}

}  // namespace

size_t ParameterCount(const LossSpec& loss, size_t feature_dim) {
  return loss.kind == LossKind::kLeastSquares ? feature_dim
                                              : loss.classes * feature_dim + loss.classes;
}

double Loss(std::span<const double> w, const LossSpec& loss, const Dataset& data,
            std::span<const size_t> batch) {
  CheckShapes(w, loss, data);
  const std::vector<size_t> idx = ResolveBatch(batch, data);
  const size_t d = data.feature_dim;
  double total = 0;
  std::vector<double> probs;
  for (size_t i : idx) {
    const auto x = data.row(i);
    if (loss.kind == LossKind::kLeastSquares) {
      double r = -data.labels[i];
      for (size_t j = 0; j < d; ++j) r += w[j] * x[j];
      total += 0.5 * r * r;
    } else {
      const size_t y = LabelIndex(data.labels[i], loss.classes);
      const double log_z = Softmax(w, loss.classes, x, probs);
      double z_y = w[loss.classes * d + y];
      for (size_t j = 0; j < d; ++j) z_y += w[y * d + j] * x[j];
      total += log_z - z_y;
    }
  }
  double reg = 0;
  for (double v : w) reg += v * v;
  return total / static_cast<double>(idx.size()) + 0.5 * loss.l2 * reg;
}

std::vector<double> Gradient(std::span<const double> w, const LossSpec& loss,
                             const Dataset& data, std::span<const size_t> batch) {
  CheckShapes(w, loss, data);
  const std::vector<size_t> idx = ResolveBatch(batch, data);
  const size_t d = data.feature_dim;
  std::vector<double> grad(w.size(), 0.0);
  std::vector<double> probs;
  for (size_t i : idx) {
    const auto x = data.row(i);
    if (loss.kind == LossKind::kLeastSquares) {
      double r = -data.labels[i];
      for (size_t j = 0; j < d; ++j) r += w[j] * x[j];
      for (size_t j = 0; j < d; ++j) grad[j] += r * x[j];
    } else {
      const size_t y = LabelIndex(data.labels[i], loss.classes);
      Softmax(w, loss.classes, x, probs);
      probs[y] -= 1.0;
      for (size_t c = 0; c < loss.classes; ++c) {
        double* gc = grad.data() + c * d;
        for (size_t j = 0; j < d; ++j) gc[j] += probs[c] * x[j];
        grad[loss.classes * d + c] += probs[c];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (size_t p = 0; p < grad.size(); ++p) grad[p] = grad[p] * inv + loss.l2 * w[p];
  return grad;
}

double Accuracy(std::span<const double> w, const LossSpec& loss, const Dataset& data) {
  Require(loss.kind == LossKind::kLogistic, ErrorCode::kUnsupported,
          "accuracy is defined for classification models only");
  CheckShapes(w, loss, data);
  Require(!data.empty(), ErrorCode::kInvalidArgument, "empty dataset");
  std::vector<double> probs;
  size_t correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    Softmax(w, loss.classes, data.row(i), probs);
    const auto best = static_cast<size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (static_cast<double>(best) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<double> LeastSquaresOptimum(const Dataset& data, double l2) {
  Require(!data.empty(), ErrorCode::kInvalidArgument, "empty dataset");
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto d = static_cast<Eigen::Index>(data.feature_dim);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      data.features.data(), n, d);
  Eigen::Map<const Eigen::VectorXd> y(data.labels.data(), n);
  Eigen::MatrixXd gram = x.transpose() * x / static_cast<double>(n);
  gram.diagonal().array() += l2;
  const Eigen::VectorXd rhs = x.transpose() * y / static_cast<double>(n);
  const Eigen::VectorXd w = gram.ldlt().solve(rhs);
  Require(w.allFinite(), ErrorCode::kInvalidArgument, "least-squares system is singular");
  return {w.data(), w.data() + w.size()};
}

std::vector<double> ErrorCorrect(std::span<const double> queried, std::span<const double> local,
                                 double fraction) {
  Require(queried.size() == local.size(), ErrorCode::kInvalidArgument,
          "queried and local vectors differ in length");
  Require(fraction >= 0 && fraction <= 1, ErrorCode::kInvalidArgument,
          "error-correction fraction must lie in [0, 1]");
  std::vector<double> out(queried.begin(), queried.end());
  const auto drop = static_cast<size_t>(std::floor(fraction * static_cast<double>(out.size())));
  if (drop == 0) return out;
  std::vector<size_t> order(out.size());
  std::iota(order.begin(), order.end(), size_t{0});
  auto worse = [&](size_t a, size_t b) {
    const double ga = std::abs(queried[a] - local[a]);
    const double gb = std::abs(queried[b] - local[b]);
    return ga != gb ? ga > gb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + (drop - 1), order.end(), worse);
  for (size_t r = 0; r < drop; ++r) out[order[r]] = 0.0;
  return out;
}

double StepSize(size_t round, double c) {
  Require(round >= 1, ErrorCode::kInvalidArgument, "rounds are counted from 1");
  Require(c > 0, ErrorCode::kInvalidArgument, "step constant must be positive");
  return c / std::sqrt(static_cast<double>(round));
}

}  // namespace diffsketch
