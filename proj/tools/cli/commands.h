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

#ifndef DIFFSKETCH_TOOLS_CLI_COMMANDS_H_
#define DIFFSKETCH_TOOLS_CLI_COMMANDS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cli/metrics.h"
#include "diffsketch/data.h"
#include "diffsketch/model.h"
#include "diffsketch/training.h"

namespace diffsketch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr const char* kSeedEnv = "DIFFSKETCH_SEED";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputOptions {
  std::string out = "-";
  std::string summary;
  bool no_timestamp = false;
};

struct SketchBenchOptions {
  std::optional<double> mu;
  std::optional<double> delta;
  std::optional<uint32_t> t;
  std::optional<std::string> k;  // integer, or "n" for k = n
  uint64_t n = 2000;
  size_t trials = 50;
  bool sparse = false;
  uint64_t seed = 1;
};

struct PrivacySweepOptions {
  double alpha = 1.6448536269514722;  // 90th percentile of |N(0, 1)|
  double sigma2 = 1.0;
  uint64_t n = 100000;
  uint32_t t = 7;
  std::optional<std::string> k_grid;  // comma-separated
  std::optional<std::string> compression_grid;
};

// Default k grid of the privacy sweep.
std::vector<uint32_t> DefaultSweepGrid();

struct TrainOptions {
  std::string mode = "distributed-sgd";
  size_t workers = 10;
  size_t rounds = 100;
  size_t batch = 10;
  double lr = 0.01;
  std::string lr_schedule = "const";
  std::optional<double> step_c;
  std::string eps = "inf";
  std::optional<uint32_t> t;
  std::optional<uint32_t> k;
  std::optional<double> compression;
  uint64_t pad = 0;
  std::optional<double> errcorr_frac;
  std::optional<size_t> devices_per_round;
  size_t local_epochs = 1;
  bool uncompressed = false;
  std::string dataset = "synth-cls";
  std::string loss = "auto";
  std::string label_column = "label";
  std::optional<size_t> features;
  size_t classes = 10;
  size_t samples_per_worker = 200;
  size_t test_samples = 2000;
  std::optional<size_t> classes_per_worker;
  std::optional<double> dirichlet;
  double separation = kDefaultSeparation;
  double noise_sd = 0.1;
  double test_fraction = 0.2;
  uint64_t seed = 1;
  size_t threads = 1;
  std::string dump_sketch;
};

// Resolved experiment: config, model, data.
struct Experiment {
  TrainConfig config;
  LossSpec loss;
  Partition partition;
  Dataset pooled;
  Dataset test;
  size_t parameters = 0;
};

// Turns flags into an experiment; throws UsageError on inconsistent flags.
// Warnings (e.g. error correction requested in federated mode) go to `warn`.
Experiment BuildExperiment(const TrainOptions& options, std::ostream& warn);

// Runs all rounds, calling `on_round` after each with the raw outcome and the
// evaluated metrics.
using RoundCallback = std::function<void(const RoundOutcome&, const RoundMetrics&)>;
std::vector<RoundMetrics> RunExperiment(Experiment& experiment, const RoundOptions& round_options,
                                        const RoundCallback& on_round);

// Full command-line entry point; `args` excludes the program name. Returns the
// process exit code (0 ok, 2 usage, 3 runtime).
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace diffsketch::cli

#endif  // DIFFSKETCH_TOOLS_CLI_COMMANDS_H_
