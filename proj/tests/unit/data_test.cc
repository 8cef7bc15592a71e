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

#include "diffsketch/data.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "diffsketch/error.h"
#include "diffsketch/model.h"

namespace diffsketch {
namespace {

std::string Fixture(const std::string& name) { return std::string(DIFFSKETCH_FIXTURES) + "/" + name; }

TEST(SynthRegression, NoiselessOptimumRecoversTruth) {
  const RegressionData reg = SynthRegression(4, 50, 20, 0.0, 3);
  const auto w = LeastSquaresOptimum(reg.partition.Pooled(), 0.0);
  ASSERT_EQ(w.size(), 20u);
  for (size_t p = 0; p < 20; ++p) EXPECT_NEAR(w[p], reg.true_weights[p], 1e-8);
}

TEST(SynthRegression, DeterministicAndSized) {
  const RegressionData a = SynthRegression(3, 17, 5, 0.1, 11);
  const RegressionData b = SynthRegression(3, 17, 5, 0.1, 11);
  const RegressionData c = SynthRegression(3, 17, 5, 0.1, 12);
  ASSERT_EQ(a.partition.workers.size(), 3u);
  for (size_t w = 0; w < 3; ++w) {
    EXPECT_EQ(a.partition.workers[w].size(), 17u);
    EXPECT_EQ(a.partition.workers[w].features, b.partition.workers[w].features);
    EXPECT_EQ(a.partition.workers[w].labels, b.partition.workers[w].labels);
  }
  EXPECT_NE(a.partition.workers[0].features, c.partition.workers[0].features);
  EXPECT_EQ(a.partition.kind, PartitionKind::kIid);
  EXPECT_EQ(a.partition.total_samples(), 51u);
  EXPECT_THROW(SynthRegression(0, 10, 5, 0.1, 1), Error);
  EXPECT_THROW(SynthRegression(2, 0, 5, 0.1, 1), Error);
  EXPECT_THROW(SynthRegression(2, 10, 0, 0.1, 1), Error);
}

TEST(SynthRegression, FeatureMeansNearZero) {
  const size_t n = 400;
  const RegressionData reg = SynthRegression(5, n, 10, 0.1, 21);
  for (const Dataset& d : reg.partition.workers) {
    for (size_t j = 0; j < 10; ++j) {
      double mean = 0;
      for (size_t s = 0; s < n; ++s) mean += d.row(s)[j];
      mean /= n;
      EXPECT_LT(std::abs(mean), 4 / std::sqrt(static_cast<double>(n)));
    }
  }
}

ClassificationSpec SmallSpec() {
  ClassificationSpec spec;
  spec.workers = 6;
  spec.samples_per_worker = 60;
  spec.feature_dim = 8;
  spec.classes = 4;
  spec.test_samples = 100;
  spec.seed = 5;
  return spec;
}

TEST(SynthClassification, LabelSkewExtremes) {
  ClassificationSpec spec = SmallSpec();
  spec.skew = LabelSkew{4};
  const ClassificationData iid = SynthClassification(spec);
  EXPECT_EQ(iid.partition.kind, PartitionKind::kIid);
  for (const Dataset& d : iid.partition.workers) {
    EXPECT_EQ(d.size(), 60u);
    EXPECT_EQ(std::set<double>(d.labels.begin(), d.labels.end()).size(), 4u);
  }
  spec.skew = LabelSkew{1};
  const ClassificationData single = SynthClassification(spec);
  EXPECT_EQ(single.partition.kind, PartitionKind::kLabelSkew);
  for (size_t w = 0; w < spec.workers; ++w) {
    const Dataset& d = single.partition.workers[w];
    EXPECT_EQ(d.size(), 60u);
    const std::set<double> labels(d.labels.begin(), d.labels.end());
    ASSERT_EQ(labels.size(), 1u);
    EXPECT_EQ(*labels.begin(), static_cast<double>(w % 4));
  }
  spec.skew = LabelSkew{2};
  for (const Dataset& d : SynthClassification(spec).partition.workers) {
    EXPECT_LE(std::set<double>(d.labels.begin(), d.labels.end()).size(), 2u);
  }
}

TEST(SynthClassification, DirichletAndErrors) {
  ClassificationSpec spec = SmallSpec();
  spec.skew = DirichletSkew{0.3};
  const ClassificationData a = SynthClassification(spec);
  const ClassificationData b = SynthClassification(spec);
  EXPECT_EQ(a.partition.kind, PartitionKind::kDirichlet);
  for (size_t w = 0; w < spec.workers; ++w) {
    EXPECT_EQ(a.partition.workers[w].size(), 60u);
    EXPECT_EQ(a.partition.workers[w].labels, b.partition.workers[w].labels);
  }
  EXPECT_EQ(a.test.size(), 100u);
  spec.skew = LabelSkew{5};
  EXPECT_THROW(SynthClassification(spec), Error);
  spec.skew = LabelSkew{0};
  EXPECT_THROW(SynthClassification(spec), Error);
  spec.skew = LabelSkew{1};
  spec.classes = 1;
  EXPECT_THROW(SynthClassification(spec), Error);
  spec = SmallSpec();
  spec.skew = DirichletSkew{0.0};
  EXPECT_THROW(SynthClassification(spec), Error);
}

// Full-batch gradient descent on the pooled default task.
TEST(SynthClassification, DefaultSeparationIsLearnable) {
  ClassificationSpec spec;
  spec.seed = 1;
  const ClassificationData data = SynthClassification(spec);
  const Dataset pooled = data.partition.Pooled();
  const LossSpec loss{LossKind::kLogistic, 0.0, 10};
  std::vector<double> w(ParameterCount(loss, 784), 0.0);
  for (int it = 0; it < 60; ++it) {
    const auto g = Gradient(w, loss, pooled);
    for (size_t p = 0; p < w.size(); ++p) w[p] -= 0.5 * g[p];
  }
  EXPECT_GE(Accuracy(w, loss, data.test), 0.90);
}

TEST(LoadCsv, Fixture) {
  const Dataset d = LoadCsv(Fixture("tiny.csv"), "label");
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.feature_dim, 3u);
  EXPECT_EQ(d.labels, (std::vector<double>{1, 0, 2}));
  EXPECT_EQ(d.features, (std::vector<double>{0.5, -1.25, 3, 2, 0, -0.75, 1e-3, 4.5, 6}));
  const Dataset by_index = LoadCsv(Fixture("tiny.csv"), "0");
  EXPECT_EQ(by_index.labels, (std::vector<double>{0.5, 2, 1e-3}));
}

TEST(LoadCsv, ErrorsCarryPositions) {
  try {
    LoadCsv(Fixture("bad_cell.csv"), "y");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 4u);
    EXPECT_NE(std::string(e.what()).find("(2,4)"), std::string::npos);
  }
  try {
    LoadCsv(Fixture("ragged.csv"), "y");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_EQ(e.row(), 2u);
  }
  try {
    LoadCsv(Fixture("tiny.csv"), "nope");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  try {
    LoadCsv(Fixture("missing.csv"), "y");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(LoadCsv, WriteReadRoundTrip) {
  const RegressionData reg = SynthRegression(1, 25, 4, 0.7, 8);
  Dataset d = reg.partition.workers[0];
  d.features[0] = 1e-300;
  d.labels[1] = -0.1;
  const auto path = std::filesystem::temp_directory_path() / "diffsketch_roundtrip.csv";
  WriteCsv(path.string(), d);
  const Dataset back = LoadCsv(path.string(), "label");
  std::filesystem::remove(path);
  EXPECT_EQ(back.feature_dim, d.feature_dim);
  ASSERT_EQ(back.features.size(), d.features.size());
  for (size_t i = 0; i < d.features.size(); ++i) EXPECT_EQ(back.features[i], d.features[i]);
  EXPECT_EQ(back.labels, d.labels);
}

TEST(GradientHistogram, ConstantVector) {
  const Histogram h = GradientHistogram(std::vector<double>(50, 2.5), 10);
  EXPECT_EQ(h.counts[0], 50u);
  for (size_t b = 1; b < 10; ++b) EXPECT_EQ(h.counts[b], 0u);
  EXPECT_EQ(h.mean, 2.5);
  EXPECT_EQ(h.variance, 0.0);
  EXPECT_EQ(h.excess_kurtosis, 0.0);
}

TEST(GradientHistogram, GaussianMoments) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  std::vector<double> g(100000);
  for (double& v : g) v = normal(rng);
  const Histogram h = GradientHistogram(g, 64);
  uint64_t total = 0;
  for (uint64_t c : h.counts) total += c;
  EXPECT_EQ(total, g.size());
  EXPECT_EQ(h.n, g.size());
  EXPECT_NEAR(h.excess_kurtosis, 0.0, 0.1);
  EXPECT_NEAR(h.variance, 1.0, 0.02);
  EXPECT_NEAR(h.mean, 0.0, 0.02);
  EXPECT_THROW(GradientHistogram(std::vector<double>{}, 4), Error);
  EXPECT_THROW(GradientHistogram(g, 0), Error);
}

}  // namespace
}  // namespace diffsketch
