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

#include "cli/metrics.h"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>

namespace diffsketch::cli {

nlohmann::ordered_json JsonNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::ordered_json JsonNumber(const std::optional<double>& v) {
  if (!v) return nullptr;
  return JsonNumber(*v);
}

Record NewRecord(const std::string& type) {
  Record r;
  r["schema_version"] = kSchemaVersion;
  r["type"] = type;
  return r;
}

Record ToRecord(const RoundMetrics& m) {
  Record r = NewRecord("round");
  r["round"] = m.round;
  r["train_loss"] = JsonNumber(m.train_loss);
  r["test_accuracy"] = JsonNumber(m.test_accuracy);
  r["eps_mean"] = JsonNumber(m.eps_mean);
  r["eps_max"] = JsonNumber(m.eps_max);
  r["noise_added"] = m.noise_added;
  r["participants"] = m.participants;
  r["bytes_sent"] = m.bytes_sent;
  r["normalized_comm"] = JsonNumber(m.normalized_comm);
  r["compression_ratio"] = JsonNumber(m.compression_ratio);
  r["t"] = m.t;
  r["k"] = m.k;
  r["n_padded"] = m.n_padded;
  r["step"] = JsonNumber(m.step);
  return r;
}

void RecordWriter::Write(Record record) {
  if (timestamps_) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
    record["timestamp"] = buf;
  }
  out_ << record.dump() << '\n';
}

std::string FormatShortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

namespace {

std::string Optional(const std::optional<double>& v) { return v ? FormatShortest(*v) : ""; }

}  // namespace

void WriteSummaryCsv(std::ostream& out, const std::vector<RoundMetrics>& rows) {
  out << "round,train_loss,test_accuracy,eps_mean,eps_max,noise_added,participants,bytes_sent,"
         "normalized_comm,compression_ratio,t,k,n_padded\n";
  for (const RoundMetrics& m : rows) {
    out << m.round << ',' << FormatShortest(m.train_loss) << ',' << Optional(m.test_accuracy)
        << ',' << Optional(m.eps_mean) << ',' << Optional(m.eps_max) << ',' << m.noise_added << ','
        << m.participants << ',' << m.bytes_sent << ',' << FormatShortest(m.normalized_comm) << ','
        << FormatShortest(m.compression_ratio) << ',' << m.t << ',' << m.k << ',' << m.n_padded
        << '\n';
  }
}

}  // namespace diffsketch::cli
