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

#ifndef DIFFSKETCH_TRAINING_H_
#define DIFFSKETCH_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "diffsketch/data.h"
#include "diffsketch/model.h"
#include "diffsketch/privacy.h"
#include "diffsketch/sketch.h"

namespace diffsketch {

enum class Protocol { kDistributedSgd, kFedAvg };
enum class LrSchedule { kConstant, kInverseSqrt };

struct TrainConfig {
  Protocol protocol = Protocol::kDistributedSgd;
  size_t workers = 10;
  size_t rounds = 100;
  // Constant step, or the c of c/sqrt(round).
  double lr = 0.01;
  LrSchedule schedule = LrSchedule::kConstant;
  size_t batch_size = 10;
  // Federated averaging only.
  size_t devices_per_round = 10;
  size_t local_epochs = 1;
  std::vector<double> sampling_weights;  // empty means uniform

  // false runs the same protocol on raw vectors: no sketch, no noise.
  bool compress = true;
  uint32_t t = 7;
  uint32_t k = 22;
  uint64_t pad = 0;
  double eps_target = std::numeric_limits<double>::infinity();
  double errcorr_fraction = 0.5;
  double alpha_percentile = kDefaultAlphaPercentile;

  uint64_t seed = 1;
  size_t threads = 1;

  void Validate() const;
};

// k = round(n_padded / (t * ratio)), at least 1.
uint32_t BinsForCompression(uint64_t n_padded, uint32_t t, double ratio);

// What one round produced, before any evaluation.
struct RoundOutcome {
  size_t round = 0;  // 1-based
  double step = 0;
  SketchDims dims;   // n includes padding
  uint64_t sketch_seed = 0;
  std::vector<size_t> participants;
  std::vector<PrivacyReport> privacy;  // one per participant, empty if uncompressed
  std::vector<double> local_sq_norms;  // ||g_k||^2 (or ||dw_k||^2) per participant
  size_t bytes_per_worker = 0;
  double compression_ratio = 1.0;
  std::optional<CountSketch> merged;  // averaged server sketch
  std::vector<std::vector<double>> local_vectors;  // kept on request
};

struct RoundOptions {
  bool keep_local_vectors = false;
  bool keep_merged_sketch = false;
};

// Every worker holds its own model. With error correction off all replicas
// stay bit-identical; error correction filters against each worker's own
// gradient and lets them drift.
struct SgdState {
  size_t round = 0;
  std::vector<std::vector<double>> worker_weights;
};

SgdState InitSgd(const TrainConfig& config, size_t parameter_count);

// One synchronous round: every worker computes a mini-batch gradient,
// estimates (alpha, sigma2), pads with Gaussian noise, sketches, validates and
// sends; the server averages the sketches; each worker queries the average,
// drops the padding, error-corrects against its own gradient and steps.
RoundOutcome SgdRound(SgdState& state, const TrainConfig& config, const LossSpec& loss,
                      const Partition& data, const RoundOptions& options = {});

struct FedAvgState {
  size_t round = 0;
  std::vector<double> weights;
};

FedAvgState InitFedAvg(const TrainConfig& config, size_t parameter_count);

// One round of federated averaging: K devices drawn by weight without
// replacement run E local epochs from the global model and send sketched
// deltas; the server averages over participants and the global model adds
// the queried mean delta. No error correction.
RoundOutcome FedAvgRound(FedAvgState& state, const TrainConfig& config, const LossSpec& loss,
                         const Partition& data, const RoundOptions& options = {});

// Weighted sampling without replacement; deterministic in `rng`.
std::vector<size_t> SampleDevices(std::span<const double> weights, size_t count, Rng& rng);

struct ConvergenceReport {
  std::vector<double> suboptimality;  // F(x_bar_i) - F(x*), i = 1..T
  std::vector<double> bound;
  double f_star = 0;
  double g2 = 0;   // max measured ||g_k||^2
  double r2 = 0;   // max ||x_i - x*||^2
  double mu = 0;   // sqrt(e / k)
  double c = 0;
  double confidence = 0;  // 1 - delta
  bool bound_holds = true;
  size_t first_violation = 0;  // 1-based round, 0 if none
};

// Running-average suboptimality of iterates x_1..x_T against
//   (R^2/(2c) + c sqrt((i+1)/i) (n mu^2 + 1) G^2) / sqrt(i)
// with mu = sqrt(e/k) and n = dims.n. Least squares only.
ConvergenceReport ConvergenceCheck(const std::vector<std::vector<double>>& iterates,
                                   const LossSpec& loss, const Dataset& pooled,
                                   const SketchDims& dims, double c, double g2, double delta);

// Right-hand side of the convergence bound at round i (1-based).
double ConvergenceBound(size_t i, double r2, double g2, double c, double n, double mu);

}  // namespace diffsketch

#endif  // DIFFSKETCH_TRAINING_H_
