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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "diffsketch/data.h"
#include "diffsketch/error.h"

namespace diffsketch {
namespace {

Dataset RandomClassification(size_t samples, size_t dim, size_t classes, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<size_t> label(0, classes - 1);
  Dataset d;
  d.feature_dim = dim;
  std::vector<double> x(dim);
  for (size_t s = 0; s < samples; ++s) {
    for (double& v : x) v = normal(rng);
    d.Append(x, static_cast<double>(label(rng)));
  }
  return d;
}

std::vector<double> RandomWeights(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0, 0.5);
  std::vector<double> w(n);
  for (double& v : w) v = normal(rng);
  return w;
}

void ExpectMatchesFiniteDifferences(const LossSpec& loss, const Dataset& data,
                                    std::vector<double> w, std::span<const size_t> batch) {
  const auto g = Gradient(w, loss, data, batch);
  const double h = 1e-6;
  for (size_t p = 0; p < w.size(); ++p) {
    const double keep = w[p];
    w[p] = keep + h;
    const double up = Loss(w, loss, data, batch);
    w[p] = keep - h;
    const double down = Loss(w, loss, data, batch);
    w[p] = keep;
    const double fd = (up - down) / (2 * h);
    EXPECT_NEAR(g[p], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "p=" << p;
  }
}

TEST(Gradient, LeastSquaresMatchesFiniteDifferences) {
  const RegressionData reg = SynthRegression(1, 30, 6, 0.3, 4);
  const Dataset& d = reg.partition.workers[0];
  for (double l2 : {0.0, 0.1}) {
    const LossSpec loss{LossKind::kLeastSquares, l2, 0};
    ExpectMatchesFiniteDifferences(loss, d, RandomWeights(6, 1), {});
    const std::vector<size_t> batch{3, 7, 7, 20};
    ExpectMatchesFiniteDifferences(loss, d, RandomWeights(6, 2), batch);
  }
}

TEST(Gradient, LogisticMatchesFiniteDifferences) {
  const Dataset d = RandomClassification(25, 5, 4, 3);
  for (double l2 : {0.0, 0.05}) {
    const LossSpec loss{LossKind::kLogistic, l2, 4};
    ExpectMatchesFiniteDifferences(loss, d, RandomWeights(ParameterCount(loss, 5), 5), {});
  }
}

TEST(Gradient, LogisticTwoClassByHand) {
  Dataset d;
  d.feature_dim = 2;
  d.Append(std::vector<double>{1, 2}, 0);
  const LossSpec loss{LossKind::kLogistic, 0.0, 2};
  const auto g = Gradient(std::vector<double>(6, 0.0), loss, d);
  const std::vector<double> want{-0.5, -1.0, 0.5, 1.0, -0.5, 0.5};
  ASSERT_EQ(g.size(), want.size());
  for (size_t p = 0; p < g.size(); ++p) EXPECT_DOUBLE_EQ(g[p], want[p]);
  EXPECT_DOUBLE_EQ(Loss(std::vector<double>(6, 0.0), loss, d), std::log(2.0));
}

TEST(Gradient, ZeroAtLeastSquaresOptimum) {
  const RegressionData reg = SynthRegression(3, 40, 8, 0.5, 9);
  const Dataset pooled = reg.partition.Pooled();
  for (double l2 : {0.0, 0.2}) {
    const LossSpec loss{LossKind::kLeastSquares, l2, 0};
    const auto w = LeastSquaresOptimum(pooled, l2);
    for (double v : Gradient(w, loss, pooled)) EXPECT_NEAR(v, 0.0, 1e-9);
  }
}

TEST(Gradient, ShapeErrors) {
  const Dataset d = RandomClassification(5, 3, 2, 1);
  const LossSpec loss{LossKind::kLogistic, 0.0, 2};
  EXPECT_EQ(ParameterCount(loss, 3), 8u);
  EXPECT_EQ(ParameterCount(LossSpec{LossKind::kLogistic, 0.0, 10}, 784), 7850u);
  EXPECT_EQ(ParameterCount(LossSpec{}, 784), 784u);
  EXPECT_THROW(Gradient(std::vector<double>(7, 0.0), loss, d), Error);
}

TEST(Accuracy, CountsArgmaxHits) {
  Dataset d;
  d.feature_dim = 1;
  d.Append(std::vector<double>{1}, 1);
  d.Append(std::vector<double>{-1}, 0);
  d.Append(std::vector<double>{2}, 0);
  const LossSpec loss{LossKind::kLogistic, 0.0, 2};
  // Class 1 score = x, class 0 score = -x.
  EXPECT_DOUBLE_EQ(Accuracy(std::vector<double>{-1, 1, 0, 0}, loss, d), 2.0 / 3.0);
}

TEST(ErrorCorrect, Examples) {
  const std::vector<double> local{0, 0, 0, 0};
  const std::vector<double> queried{3, 1, 4, 2};
  EXPECT_EQ(ErrorCorrect(queried, local, 0.5), (std::vector<double>{0, 1, 0, 2}));
  EXPECT_EQ(ErrorCorrect(queried, local, 0.0), queried);
  EXPECT_EQ(ErrorCorrect(queried, local, 1.0), (std::vector<double>(4, 0.0)));
  // floor(0.6 * 4) = 2; ties go to the lower index.
  EXPECT_EQ(ErrorCorrect(std::vector<double>{1, 1, 1, 1}, local, 0.6),
            (std::vector<double>{0, 0, 1, 1}));
  EXPECT_THROW(ErrorCorrect(queried, std::vector<double>{0, 0}, 0.5), Error);
  EXPECT_THROW(ErrorCorrect(queried, local, 1.5), Error);
}

TEST(ErrorCorrect, NeverAddsNonzeros) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> q(40), l(40);
    for (size_t i = 0; i < 40; ++i) {
      q[i] = trial % 2 && i % 3 == 0 ? 0.0 : normal(rng);
      l[i] = normal(rng);
    }
    const double f = (trial % 11) / 10.0;
    const auto out = ErrorCorrect(q, l, f);
    size_t before = 0, after = 0, zeroed = 0;
    for (size_t i = 0; i < 40; ++i) {
      before += q[i] != 0;
      after += out[i] != 0;
      zeroed += out[i] != q[i];
      if (out[i] != 0) {
        EXPECT_EQ(out[i], q[i]);
      }
    }
    EXPECT_LE(after, before);
    EXPECT_LE(zeroed, static_cast<size_t>(std::floor(f * 40)));
  }
}

TEST(StepSize, Examples) {
  EXPECT_EQ(StepSize(1, 0.7), 0.7);
  EXPECT_DOUBLE_EQ(StepSize(4, 0.2), 0.1);
  EXPECT_DOUBLE_EQ(StepSize(100, 1.0), 0.1);
  EXPECT_THROW(StepSize(0, 1.0), Error);
  EXPECT_THROW(StepSize(1, 0.0), Error);
}

}  // namespace
}  // namespace diffsketch
