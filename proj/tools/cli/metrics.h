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

#ifndef DIFFSKETCH_TOOLS_CLI_METRICS_H_
#define DIFFSKETCH_TOOLS_CLI_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace diffsketch::cli {

inline constexpr int kSchemaVersion = 1;

// Per-round telemetry. Epsilon fields summarize eps_attained over the round's
// participants and are absent for uncompressed runs.
struct RoundMetrics {
  size_t round = 0;
  double train_loss = 0;
  std::optional<double> test_accuracy;
  std::optional<double> eps_mean;
  std::optional<double> eps_max;
  size_t noise_added = 0;
  size_t participants = 0;
  size_t bytes_sent = 0;  // per worker, one serialized sketch
  double normalized_comm = 0;  // rounds / compression ratio, cumulative
  double compression_ratio = 1;
  uint32_t t = 1;
  uint32_t k = 1;
  uint64_t n_padded = 0;
  double step = 0;
};

using Record = nlohmann::ordered_json;

// Numbers stay numbers; infinities and NaN become "inf", "-inf" and "nan".
nlohmann::ordered_json JsonNumber(double v);
nlohmann::ordered_json JsonNumber(const std::optional<double>& v);

Record NewRecord(const std::string& type);
Record ToRecord(const RoundMetrics& m);

// Line-delimited JSON writer. Adds a UTC timestamp to every record unless
// disabled, so output is byte-reproducible with timestamps off.
class RecordWriter {
 public:
  RecordWriter(std::ostream& out, bool timestamps) : out_(out), timestamps_(timestamps) {}
  void Write(Record record);

 private:
  std::ostream& out_;
  bool timestamps_;
};

std::string FormatShortest(double v);

// CSV with one row per round.
void WriteSummaryCsv(std::ostream& out, const std::vector<RoundMetrics>& rows);

}  // namespace diffsketch::cli

#endif  // DIFFSKETCH_TOOLS_CLI_METRICS_H_
