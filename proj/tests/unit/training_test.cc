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

#include "diffsketch/training.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "diffsketch/error.h"
#include "diffsketch/hashing.h"

namespace diffsketch {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TrainConfig SgdConfig(size_t workers) {
  TrainConfig c;
  c.workers = workers;
  c.devices_per_round = workers;
  c.rounds = 10;
  c.lr = 0.05;
  c.batch_size = 5;
  c.t = 5;
  c.k = 40;
  c.errcorr_fraction = 0.0;
  c.seed = 3;
  return c;
}

// Least squares whose gradients live on coordinate `hot` only.
Partition OneHotRegression(size_t workers, size_t dim, size_t hot) {
  Partition p;
  for (size_t w = 0; w < workers; ++w) {
    Dataset d;
    d.feature_dim = dim;
    for (size_t s = 0; s < 6; ++s) {
      std::vector<double> x(dim, 0.0);
      x[hot] = 1.0 + 0.25 * static_cast<double>(s + w);
      d.Append(x, 2.0 - 0.5 * static_cast<double>(s));
    }
    p.workers.push_back(std::move(d));
  }
  return p;
}

bool HotCoordinateIsIsolated(const SketchDims& dims, uint64_t seed, size_t hot) {
  for (uint32_t r = 0; r < dims.t; ++r) {
    const RowSeeds s = DeriveRowSeeds(seed, r);
    const uint32_t bin = IndexHash(s.index, hot, dims.k);
    for (uint64_t i = 0; i < dims.n; ++i) {
      if (i != hot && IndexHash(s.index, i, dims.k) == bin) return false;
    }
  }
  return true;
}

TEST(BinsForCompression, Examples) {
  EXPECT_EQ(BinsForCompression(7850, 7, 50), 22u);
  EXPECT_EQ(BinsForCompression(7850, 10, 15), 52u);
  EXPECT_EQ(BinsForCompression(10, 7, 1000), 1u);
  EXPECT_THROW(BinsForCompression(10, 7, 0), Error);
}

TEST(TrainConfig, Validation) {
  TrainConfig c = SgdConfig(4);
  EXPECT_NO_THROW(c.Validate());
  c.protocol = Protocol::kFedAvg;
  c.devices_per_round = 5;
  EXPECT_THROW(c.Validate(), Error);
  c.devices_per_round = 2;
  c.sampling_weights = {0.5, 0.5, 0.5, 0.5};
  EXPECT_THROW(c.Validate(), Error);
  c.sampling_weights = {0.1, 0.2, 0.3, 0.4};
  EXPECT_NO_THROW(c.Validate());
  c.local_epochs = 0;
  EXPECT_THROW(c.Validate(), Error);
  c = SgdConfig(4);
  c.errcorr_fraction = 1.5;
  EXPECT_THROW(c.Validate(), Error);
  c = SgdConfig(4);
  c.eps_target = 0;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(SgdRound, ReplicasStayIdenticalWithoutErrorCorrection) {
  const RegressionData reg = SynthRegression(6, 40, 30, 0.2, 2);
  TrainConfig c = SgdConfig(6);
  c.eps_target = 1.0;
  c.pad = 10;
  SgdState state = InitSgd(c, 30);
  const LossSpec loss{LossKind::kLeastSquares, 0.0, 0};
  for (int r = 0; r < 15; ++r) {
    const RoundOutcome out = SgdRound(state, c, loss, reg.partition);
    for (size_t w = 1; w < c.workers; ++w) {
      ASSERT_EQ(state.worker_weights[w], state.worker_weights[0]) << "round " << r;
    }
    ASSERT_EQ(out.privacy.size(), c.workers);
    for (const PrivacyReport& p : out.privacy) EXPECT_TRUE(p.Consistent());
    EXPECT_EQ(out.bytes_per_worker, kWireHeaderSize + 8u * c.t * c.k);
    EXPECT_EQ(out.dims.n, 40u);
  }
}

TEST(SgdRound, ErrorCorrectionFiltersPerWorker) {
  const RegressionData reg = SynthRegression(4, 40, 30, 0.2, 2);
  TrainConfig c = SgdConfig(4);
  c.errcorr_fraction = 0.5;
  SgdState state = InitSgd(c, 30);
  SgdRound(state, c, LossSpec{}, reg.partition);
  bool drifted = false;
  for (size_t w = 1; w < c.workers; ++w) drifted |= state.worker_weights[w] != state.worker_weights[0];
  EXPECT_TRUE(drifted);
  for (const auto& weights : state.worker_weights) {
    size_t nonzero = 0;
    for (double v : weights) nonzero += v != 0;
    EXPECT_LE(nonzero, 15u);
  }
}

TEST(SgdRound, CollisionFreeSketchIsExactSgd) {
  constexpr size_t kDim = 16, kHot = 5;
  const Partition data = OneHotRegression(3, kDim, kHot);
  TrainConfig c = SgdConfig(3);
  c.t = 1;
  c.k = 4096;
  c.eps_target = kInf;
  c.batch_size = 6;
  const LossSpec loss{LossKind::kLeastSquares, 0.0, 0};
  SgdState sketched = InitSgd(c, kDim);
  for (double& v : sketched.worker_weights[0]) v = 0.1;
  sketched.worker_weights.assign(3, sketched.worker_weights[0]);
  SgdState plain = sketched;
  TrainConfig raw = c;
  raw.compress = false;
  for (int r = 0; r < 5; ++r) {
    const RoundOutcome out = SgdRound(sketched, c, loss, data);
    ASSERT_TRUE(HotCoordinateIsIsolated(out.dims, out.sketch_seed, kHot)) << "round " << r;
    SgdRound(plain, raw, loss, data);
    for (size_t p = 0; p < kDim; ++p) {
      EXPECT_NEAR(sketched.worker_weights[0][p], plain.worker_weights[0][p], 1e-12);
    }
  }
}

TEST(SgdRound, SingleWorkerStepsAlongQueriedSketch) {
  const RegressionData reg = SynthRegression(1, 30, 12, 0.2, 6);
  TrainConfig c = SgdConfig(1);
  c.t = 3;
  c.k = 5;
  SgdState state = InitSgd(c, 12);
  for (size_t p = 0; p < 12; ++p) state.worker_weights[0][p] = 0.1 * static_cast<double>(p);
  const std::vector<double> before = state.worker_weights[0];
  RoundOptions opts;
  opts.keep_merged_sketch = true;
  opts.keep_local_vectors = true;
  const RoundOutcome out = SgdRound(state, c, LossSpec{}, reg.partition, opts);
  ASSERT_TRUE(out.merged.has_value());
  CountSketch direct(out.dims, out.sketch_seed);
  direct.Encode(out.local_vectors[0]);
  EXPECT_EQ(*out.merged, direct);
  const auto q = direct.QueryAll();
  for (size_t p = 0; p < 12; ++p) {
    EXPECT_DOUBLE_EQ(state.worker_weights[0][p], before[p] - c.lr * q[p]);
  }
}

TEST(SgdRound, ObjectiveMostlyDecreases) {
  const RegressionData reg = SynthRegression(10, 100, 200, 0.5, 17);
  const Dataset pooled = reg.partition.Pooled();
  TrainConfig c = SgdConfig(10);
  c.t = 5;
  c.k = 100;
  c.lr = 0.01;
  c.batch_size = 50;
  c.eps_target = kInf;
  SgdState state = InitSgd(c, 200);
  const LossSpec loss{LossKind::kLeastSquares, 0.0, 0};
  double previous = Loss(state.worker_weights[0], loss, pooled);
  int decreases = 0;
  for (int r = 0; r < 200; ++r) {
    SgdRound(state, c, loss, reg.partition);
    const double now = Loss(state.worker_weights[0], loss, pooled);
    decreases += now < previous;
    previous = now;
  }
  EXPECT_GE(decreases, 190);
}

TEST(SgdRound, ThreadCountDoesNotChangeResults) {
  const RegressionData reg = SynthRegression(8, 30, 20, 0.2, 4);
  TrainConfig c = SgdConfig(8);
  c.eps_target = 0.5;
  c.pad = 7;
  c.errcorr_fraction = 0.5;
  TrainConfig parallel = c;
  parallel.threads = 4;
  SgdState a = InitSgd(c, 20), b = InitSgd(parallel, 20);
  for (int r = 0; r < 6; ++r) {
    SgdRound(a, c, LossSpec{}, reg.partition);
    SgdRound(b, parallel, LossSpec{}, reg.partition);
  }
  EXPECT_EQ(a.worker_weights, b.worker_weights);
}

TEST(SampleDevices, WithoutReplacementAndWeighted) {
  Rng rng(1);
  const std::vector<double> weights{0.0, 0.5, 0.0, 0.5};
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(SampleDevices(weights, 2, rng), (std::vector<size_t>{1, 3}));
  }
  const std::vector<double> uniform(10, 0.1);
  for (int i = 0; i < 50; ++i) {
    const auto chosen = SampleDevices(uniform, 6, rng);
    EXPECT_EQ(std::set<size_t>(chosen.begin(), chosen.end()).size(), 6u);
    EXPECT_TRUE(std::is_sorted(chosen.begin(), chosen.end()));
  }
  EXPECT_EQ(SampleDevices(weights, 4, rng).size(), 4u);
  EXPECT_THROW(SampleDevices(weights, 5, rng), Error);
}

TEST(FedAvgRound, FullParticipationFullBatchIsGradientDescent) {
  const RegressionData reg = SynthRegression(4, 10, 3, 0.3, 12);
  TrainConfig c = SgdConfig(4);
  c.protocol = Protocol::kFedAvg;
  c.devices_per_round = 4;
  c.local_epochs = 1;
  c.batch_size = 10;
  c.t = 1;
  c.k = 1 << 20;
  c.eps_target = kInf;
  c.lr = 0.1;
  const LossSpec loss{LossKind::kLeastSquares, 0.0, 0};
  const Dataset pooled = reg.partition.Pooled();
  FedAvgState state = InitFedAvg(c, 3);
  std::vector<double> w = state.weights;
  for (int r = 0; r < 5; ++r) {
    const RoundOutcome out = FedAvgRound(state, c, loss, reg.partition);
    std::set<uint32_t> bins;
    const RowSeeds s = DeriveRowSeeds(out.sketch_seed, 0);
    for (uint64_t i = 0; i < 3; ++i) bins.insert(IndexHash(s.index, i, c.k));
    ASSERT_EQ(bins.size(), 3u) << "sketch collided in round " << r;
    EXPECT_EQ(out.participants, (std::vector<size_t>{0, 1, 2, 3}));
    const auto g = Gradient(w, loss, pooled);
    for (size_t p = 0; p < 3; ++p) w[p] -= c.lr * g[p];
    for (size_t p = 0; p < 3; ++p) EXPECT_NEAR(state.weights[p], w[p], 1e-12);
  }
}

TEST(FedAvgRound, SingleDeviceAppliesItsQueriedDelta) {
  const RegressionData reg = SynthRegression(5, 12, 9, 0.3, 13);
  TrainConfig c = SgdConfig(5);
  c.protocol = Protocol::kFedAvg;
  c.devices_per_round = 1;
  c.local_epochs = 2;
  c.batch_size = 4;
  c.t = 3;
  c.k = 4;
  FedAvgState state = InitFedAvg(c, 9);
  RoundOptions opts;
  opts.keep_merged_sketch = true;
  opts.keep_local_vectors = true;
  for (int r = 0; r < 3; ++r) {
    const std::vector<double> before = state.weights;
    const RoundOutcome out = FedAvgRound(state, c, LossSpec{}, reg.partition, opts);
    ASSERT_EQ(out.participants.size(), 1u);
    CountSketch direct(out.dims, out.sketch_seed);
    direct.Encode(out.local_vectors[0]);
    const auto q = direct.QueryAll();
    for (size_t p = 0; p < 9; ++p) EXPECT_DOUBLE_EQ(state.weights[p], before[p] + q[p]);
  }
}

TEST(FedAvgRound, LabelSkewTrainingImproves) {
  ClassificationSpec spec;
  spec.workers = 20;
  spec.samples_per_worker = 100;
  spec.feature_dim = 784;
  spec.classes = 10;
  spec.skew = LabelSkew{2};
  spec.test_samples = 1000;
  spec.seed = 7;
  const ClassificationData data = SynthClassification(spec);
  const LossSpec loss{LossKind::kLogistic, 0.0, 10};
  TrainConfig c;
  c.protocol = Protocol::kFedAvg;
  c.workers = 20;
  c.devices_per_round = 5;
  c.local_epochs = 1;
  c.batch_size = 10;
  c.lr = 0.01;
  c.t = 10;
  c.errcorr_fraction = 0.0;
  c.k = BinsForCompression(ParameterCount(loss, 784), c.t, 15);
  ASSERT_EQ(c.k, 52u);
  c.seed = 7;
  FedAvgState state = InitFedAvg(c, ParameterCount(loss, 784));
  const Dataset pooled = data.partition.Pooled();
  const double start = Accuracy(state.weights, loss, pooled);
  for (int r = 0; r < 100; ++r) FedAvgRound(state, c, loss, data.partition);
  EXPECT_GT(Accuracy(state.weights, loss, pooled), start + 0.2);
}

TEST(Convergence, BoundShapeAndTrivialCases) {
  for (size_t i = 1; i < 500; ++i) {
    EXPECT_GT(ConvergenceBound(i, 4.0, 2.0, 0.3, 200, 0.16),
              ConvergenceBound(i + 1, 4.0, 2.0, 0.3, 200, 0.16));
  }
  const RegressionData reg = SynthRegression(2, 30, 5, 0.3, 5);
  const Dataset pooled = reg.partition.Pooled();
  const LossSpec loss{LossKind::kLeastSquares, 0.0, 0};
  const auto x_star = LeastSquaresOptimum(pooled, 0.0);
  const ConvergenceReport r =
      ConvergenceCheck({x_star}, loss, pooled, SketchDims{5, 100, 5}, 0.1, 1.0, 0.01);
  EXPECT_NEAR(r.suboptimality[0], 0.0, 1e-12);
  EXPECT_TRUE(r.bound_holds);
  EXPECT_DOUBLE_EQ(r.mu, std::sqrt(std::exp(1.0) / 100));
  EXPECT_THROW(ConvergenceCheck({x_star}, LossSpec{LossKind::kLogistic, 0.0, 2}, pooled,
                                SketchDims{5, 100, 5}, 0.1, 1.0, 0.01),
               Error);
}

}  // namespace
}  // namespace diffsketch
