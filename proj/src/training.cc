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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "diffsketch/error.h"
#include "diffsketch/random.h"
#include "parallel.h"

namespace diffsketch {

void TrainConfig::Validate() const {
  Require(workers >= 1, ErrorCode::kInvalidArgument, "need at least one worker");
  Require(rounds >= 1, ErrorCode::kInvalidArgument, "need at least one round");
  Require(lr > 0 && std::isfinite(lr), ErrorCode::kInvalidArgument, "learning rate must be positive");
  Require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch size must be positive");
  Require(local_epochs >= 1, ErrorCode::kInvalidArgument, "local epochs must be at least 1");
  Require(devices_per_round >= 1, ErrorCode::kInvalidArgument, "devices per round must be >= 1");
  if (protocol == Protocol::kFedAvg) {
    Require(devices_per_round <= workers, ErrorCode::kInvalidArgument,
            "devices per round (" + std::to_string(devices_per_round) +
                ") exceeds available devices (" + std::to_string(workers) + ")");
  }
  if (!sampling_weights.empty()) {
    Require(sampling_weights.size() == workers, ErrorCode::kInvalidArgument,
            "one sampling weight per device required");
    double total = 0;
    for (double p : sampling_weights) {
      Require(p >= 0 && std::isfinite(p), ErrorCode::kInvalidArgument,
              "sampling weights must be non-negative");
      total += p;
    }
    Require(std::abs(total - 1.0) < 1e-9, ErrorCode::kInvalidArgument,
            "sampling weights must sum to 1");
  }
  Require(errcorr_fraction >= 0 && errcorr_fraction <= 1, ErrorCode::kInvalidArgument,
          "error-correction fraction must lie in [0, 1]");
  Require(eps_target > 0, ErrorCode::kInvalidArgument, "target epsilon must be positive");
  Require(alpha_percentile > 0 && alpha_percentile <= 1, ErrorCode::kInvalidArgument,
          "alpha percentile must lie in (0, 1]");
  if (compress) {
    Require(t >= 1 && k >= 1, ErrorCode::kInvalidArgument, "sketch needs t >= 1 and k >= 1");
  }
}

uint32_t BinsForCompression(uint64_t n_padded, uint32_t t, double ratio) {
  Require(ratio > 0 && std::isfinite(ratio), ErrorCode::kInvalidArgument,
          "compression ratio must be positive");
  Require(t >= 1, ErrorCode::kInvalidArgument, "t must be at least 1");
  const double k = std::round(static_cast<double>(n_padded) / (t * ratio));
  return static_cast<uint32_t>(std::clamp(k, 1.0, 4294967295.0));
}

namespace {

double RoundStep(const TrainConfig& config, size_t round) {
  return config.schedule == LrSchedule::kConstant ? config.lr : StepSize(round, config.lr);
}

std::vector<size_t> SampleBatch(size_t population, size_t batch, Rng& rng) {
  std::vector<size_t> idx(population);
  std::iota(idx.begin(), idx.end(), size_t{0});
  batch = std::min(batch, population);
  for (size_t i = 0; i < batch; ++i) {
    std::uniform_int_distribution<size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(batch);
  return idx;
}

double SquaredNorm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return s;
}

struct Upload {
  std::optional<CountSketch> sketch;
  PrivacyReport report;
};

// Compression + validation for one participant.
Upload Compress(std::span<const double> local, const TrainConfig& config, const SketchDims& dims,
                uint64_t sketch_seed, size_t participant, size_t round) {
  GradientStats stats = EstimateStats(local, config.alpha_percentile);
  stats.n = dims.n;
  Rng pad_rng = MakeRng(config.seed, Stream::kPadding, {participant, round});
  const std::vector<double> padded = PadWithNoise(local, config.pad, stats, pad_rng);
  Upload up;
  up.sketch.emplace(dims, sketch_seed);
  up.sketch->Encode(padded);
  Rng noise_rng = MakeRng(config.seed, Stream::kLaplace, {participant, round});
  up.report = ValidateAndNoise(*up.sketch, stats, config.eps_target, noise_rng);
  return up;
}

// Server side: average of the uploads, queried back to the model dimension.
std::vector<double> Aggregate(std::vector<Upload>& uploads,
                              const std::vector<std::vector<double>>& locals,
                              const TrainConfig& config, size_t dim, RoundOutcome& outcome,
                              const RoundOptions& options) {
  const double inv = 1.0 / static_cast<double>(locals.size());
  if (!config.compress) {
    std::vector<double> mean(dim, 0.0);
    for (const auto& v : locals) {
      for (size_t p = 0; p < dim; ++p) mean[p] += v[p];
    }
    for (double& m : mean) m *= inv;
    return mean;
  }
  CountSketch merged = std::move(*uploads[0].sketch);
  for (size_t u = 1; u < uploads.size(); ++u) merged.MergeFrom(*uploads[u].sketch);
  merged.Scale(inv);
  for (auto& up : uploads) outcome.privacy.push_back(up.report);
  std::vector<double> estimate = merged.QueryPrefix(dim);
  if (options.keep_merged_sketch) outcome.merged = std::move(merged);
  return estimate;
}

void FillShape(RoundOutcome& outcome, const TrainConfig& config, size_t dim) {
  outcome.dims = {config.compress ? config.t : 1, config.compress ? config.k : 1,
                  dim + (config.compress ? config.pad : 0)};
  outcome.sketch_seed = StreamSeed(config.seed, Stream::kSketchSeed, {outcome.round});
  if (config.compress) {
    outcome.bytes_per_worker = SerializedSize(outcome.dims);
    outcome.compression_ratio = CompressionRatio(outcome.dims);
  } else {
    outcome.bytes_per_worker = 8 * dim;
    outcome.compression_ratio = 1.0;
  }
}

}  // namespace

SgdState InitSgd(const TrainConfig& config, size_t parameter_count) {
  config.Validate();
  SgdState state;
  state.worker_weights.assign(config.workers, std::vector<double>(parameter_count, 0.0));
  return state;
}

RoundOutcome SgdRound(SgdState& state, const TrainConfig& config, const LossSpec& loss,
                      const Partition& data, const RoundOptions& options) {
  Require(data.workers.size() == config.workers, ErrorCode::kInvalidArgument,
          "partition has " + std::to_string(data.workers.size()) + " workers, config has " +
              std::to_string(config.workers));
  Require(state.worker_weights.size() == config.workers, ErrorCode::kInvalidArgument,
          "state is not initialized for this configuration");
  const size_t dim = state.worker_weights.front().size();
  RoundOutcome outcome;
  outcome.round = ++state.round;
  outcome.step = RoundStep(config, outcome.round);
  FillShape(outcome, config, dim);
  outcome.participants.resize(config.workers);
  std::iota(outcome.participants.begin(), outcome.participants.end(), size_t{0});

  std::vector<std::vector<double>> locals(config.workers);
  std::vector<Upload> uploads(config.compress ? config.workers : 0);
  internal::ParallelFor(config.workers, config.threads, [&](size_t w) {
    Rng batch_rng = MakeRng(config.seed, Stream::kBatch, {w, outcome.round});
    const auto batch = SampleBatch(data.workers[w].size(), config.batch_size, batch_rng);
    locals[w] = Gradient(state.worker_weights[w], loss, data.workers[w], batch);
    if (config.compress) {
      uploads[w] = Compress(locals[w], config, outcome.dims, outcome.sketch_seed, w, outcome.round);
    }
  });
  for (const auto& g : locals) outcome.local_sq_norms.push_back(SquaredNorm(g));

  const std::vector<double> estimate = Aggregate(uploads, locals, config, dim, outcome, options);
  const bool correct = config.compress && config.errcorr_fraction > 0;
  internal::ParallelFor(config.workers, config.threads, [&](size_t w) {
    const std::vector<double> update =
        correct ? ErrorCorrect(estimate, locals[w], config.errcorr_fraction) : estimate;
    auto& weights = state.worker_weights[w];
    for (size_t p = 0; p < dim; ++p) weights[p] -= outcome.step * update[p];
  });
  if (options.keep_local_vectors) outcome.local_vectors = std::move(locals);
  return outcome;
}

FedAvgState InitFedAvg(const TrainConfig& config, size_t parameter_count) {
  config.Validate();
  FedAvgState state;
  state.weights.assign(parameter_count, 0.0);
  return state;
}

std::vector<size_t> SampleDevices(std::span<const double> weights, size_t count, Rng& rng) {
  Require(count <= weights.size(), ErrorCode::kInvalidArgument,
          "cannot sample " + std::to_string(count) + " of " + std::to_string(weights.size()) +
              " devices");
  std::vector<double> remaining(weights.begin(), weights.end());
  std::vector<size_t> chosen;
  chosen.reserve(count);
  for (size_t c = 0; c < count; ++c) {
    double total = 0;
    for (double w : remaining) total += w;
    size_t pick;
    if (total > 0) {
      std::discrete_distribution<size_t> draw(remaining.begin(), remaining.end());
      pick = draw(rng);
    } else {
      // Only zero-weight devices are left; fall back to uniform among them.
      std::vector<size_t> left;
      for (size_t d = 0; d < remaining.size(); ++d) {
        if (std::find(chosen.begin(), chosen.end(), d) == chosen.end()) left.push_back(d);
      }
      std::uniform_int_distribution<size_t> draw(0, left.size() - 1);
      pick = left[draw(rng)];
    }
    chosen.push_back(pick);
    remaining[pick] = 0.0;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

RoundOutcome FedAvgRound(FedAvgState& state, const TrainConfig& config, const LossSpec& loss,
                         const Partition& data, const RoundOptions& options) {
  Require(data.workers.size() == config.workers, ErrorCode::kInvalidArgument,
          "partition has " + std::to_string(data.workers.size()) + " devices, config has " +
              std::to_string(config.workers));
  Require(config.devices_per_round <= data.workers.size(), ErrorCode::kInvalidArgument,
          "devices per round exceeds available devices");
  const size_t dim = state.weights.size();
  RoundOutcome outcome;
  outcome.round = ++state.round;
  outcome.step = RoundStep(config, outcome.round);
  FillShape(outcome, config, dim);

  std::vector<double> weights = config.sampling_weights;
  if (weights.empty()) weights.assign(config.workers, 1.0 / static_cast<double>(config.workers));
  Rng device_rng = MakeRng(config.seed, Stream::kDeviceSampling, {outcome.round});
  outcome.participants = SampleDevices(weights, config.devices_per_round, device_rng);

  const size_t count = outcome.participants.size();
  std::vector<std::vector<double>> deltas(count);
  std::vector<Upload> uploads(config.compress ? count : 0);
  internal::ParallelFor(count, config.threads, [&](size_t s) {
    const size_t device = outcome.participants[s];
    const Dataset& local = data.workers[device];
    Require(!local.empty(), ErrorCode::kInvalidArgument, "device holds no samples");
    std::vector<double> w = state.weights;
    Rng batch_rng = MakeRng(config.seed, Stream::kBatch, {device, outcome.round});
    std::vector<size_t> order(local.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), batch_rng);
      for (size_t start = 0; start < order.size(); start += config.batch_size) {
        const size_t end = std::min(order.size(), start + config.batch_size);
        const auto g = Gradient(w, loss, local, std::span(order).subspan(start, end - start));
        for (size_t p = 0; p < dim; ++p) w[p] -= outcome.step * g[p];
      }
    }
    for (size_t p = 0; p < dim; ++p) w[p] -= state.weights[p];
    deltas[s] = std::move(w);
    if (config.compress) {
      uploads[s] = Compress(deltas[s], config, outcome.dims, outcome.sketch_seed, device,
                            outcome.round);
    }
  });
  for (const auto& d : deltas) outcome.local_sq_norms.push_back(SquaredNorm(d));

  const std::vector<double> estimate = Aggregate(uploads, deltas, config, dim, outcome, options);
  for (size_t p = 0; p < dim; ++p) state.weights[p] += estimate[p];
  if (options.keep_local_vectors) outcome.local_vectors = std::move(deltas);
  return outcome;
}

double ConvergenceBound(size_t i, double r2, double g2, double c, double n, double mu) {
  Require(i >= 1, ErrorCode::kInvalidArgument, "rounds are counted from 1");
  const double di = static_cast<double>(i);
  return (r2 / (2 * c) + c * std::sqrt((di + 1) / di) * (n * mu * mu + 1) * g2) / std::sqrt(di);
}

ConvergenceReport ConvergenceCheck(const std::vector<std::vector<double>>& iterates,
                                   const LossSpec& loss, const Dataset& pooled,
                                   const SketchDims& dims, double c, double g2, double delta) {
  Require(loss.kind == LossKind::kLeastSquares, ErrorCode::kUnsupported,
          "convergence check needs a least-squares loss with a closed-form optimum");
  Require(!iterates.empty(), ErrorCode::kInvalidArgument, "no iterates");
  Require(c > 0, ErrorCode::kInvalidArgument, "step constant must be positive");
  Require(delta > 0 && delta < 1, ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  dims.Validate();

  ConvergenceReport report;
  const std::vector<double> x_star = LeastSquaresOptimum(pooled, loss.l2);
  report.f_star = Loss(x_star, loss, pooled);
  report.g2 = g2;
  report.c = c;
  report.mu = std::sqrt(std::numbers::e / dims.k);
  report.confidence = 1 - delta;
  for (const auto& x : iterates) {
    Require(x.size() == x_star.size(), ErrorCode::kDimensionMismatch, "iterate has wrong length");
    double d2 = 0;
    for (size_t p = 0; p < x.size(); ++p) d2 += (x[p] - x_star[p]) * (x[p] - x_star[p]);
    report.r2 = std::max(report.r2, d2);
  }
  std::vector<double> running(x_star.size(), 0.0);
  std::vector<double> average(x_star.size());
  for (size_t i = 1; i <= iterates.size(); ++i) {
    const auto& x = iterates[i - 1];
    for (size_t p = 0; p < x.size(); ++p) {
      running[p] += x[p];
      average[p] = running[p] / static_cast<double>(i);
    }
    const double gap = Loss(average, loss, pooled) - report.f_star;
    const double bound =
        ConvergenceBound(i, report.r2, report.g2, c, static_cast<double>(dims.n), report.mu);
    report.suboptimality.push_back(gap);
    report.bound.push_back(bound);
    if (gap > bound && report.bound_holds) {
      report.bound_holds = false;
      report.first_violation = i;
    }
  }
  return report;
}

}  // namespace diffsketch
