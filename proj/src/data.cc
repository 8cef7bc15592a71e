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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "diffsketch/random.h"

namespace diffsketch {

void Dataset::Append(std::span<const double> x, double y) {
  Require(x.size() == feature_dim, ErrorCode::kDimensionMismatch, "sample has wrong width");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(y);
}

size_t Partition::total_samples() const {
  size_t total = 0;
  for (const Dataset& w : workers) total += w.size();
  return total;
}

Dataset Partition::Pooled() const {
  Dataset pooled;
  pooled.feature_dim = feature_dim();
  for (const Dataset& w : workers) {
    pooled.features.insert(pooled.features.end(), w.features.begin(), w.features.end());
    pooled.labels.insert(pooled.labels.end(), w.labels.begin(), w.labels.end());
  }
  return pooled;
}

RegressionData SynthRegression(size_t workers, size_t samples_per_worker, size_t feature_dim,
                               double noise_sd, uint64_t seed) {
  Require(workers > 0 && samples_per_worker > 0 && feature_dim > 0, ErrorCode::kInvalidArgument,
          "dataset sizes must be positive");
  Require(noise_sd >= 0, ErrorCode::kInvalidArgument, "noise_sd must be non-negative");
  Rng rng = MakeRng(seed, Stream::kData, {0});
  std::normal_distribution<double> normal(0.0, 1.0);

  RegressionData out;
  out.true_weights.resize(feature_dim);
  for (double& w : out.true_weights) w = normal(rng);
  out.partition.kind = PartitionKind::kIid;
  out.partition.seed = seed;
  out.partition.workers.resize(workers);
  std::vector<double> x(feature_dim);
  for (size_t w = 0; w < workers; ++w) {
    Dataset& d = out.partition.workers[w];
    d.feature_dim = feature_dim;
    d.features.reserve(samples_per_worker * feature_dim);
    for (size_t s = 0; s < samples_per_worker; ++s) {
      double y = 0;
      for (size_t j = 0; j < feature_dim; ++j) {
        x[j] = normal(rng);
        y += out.true_weights[j] * x[j];
      }
      if (noise_sd > 0) y += noise_sd * normal(rng);
      d.Append(x, y);
    }
  }
  return out;
}

namespace {

std::vector<std::vector<double>> ClassMeans(size_t classes, size_t dim, double separation,
                                            uint64_t seed) {
  Rng rng = MakeRng(seed, Stream::kData, {1});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> means(classes, std::vector<double>(dim));
  for (auto& mean : means) {
    double norm2 = 0;
    for (double& v : mean) {
      v = normal(rng);
      norm2 += v * v;
    }
    const double scale = separation / std::sqrt(norm2);
    for (double& v : mean) v *= scale;
  }
  return means;
}

void DrawSample(const std::vector<double>& mean, Rng& rng, std::vector<double>& x) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (size_t j = 0; j < mean.size(); ++j) x[j] = mean[j] + normal(rng);
}

}  // namespace

ClassificationData SynthClassification(const ClassificationSpec& spec) {
  Require(spec.classes >= 2, ErrorCode::kInvalidArgument, "need at least 2 classes");
  Require(spec.workers > 0 && spec.samples_per_worker > 0 && spec.feature_dim > 0,
          ErrorCode::kInvalidArgument, "dataset sizes must be positive");
  Require(spec.separation > 0, ErrorCode::kInvalidArgument, "separation must be positive");
  const auto means = ClassMeans(spec.classes, spec.feature_dim, spec.separation, spec.seed);

  ClassificationData out;
  Partition& p = out.partition;
  p.seed = spec.seed;
  p.classes = spec.classes;
  p.workers.resize(spec.workers);

  // Per-worker class distribution.
  std::vector<std::vector<double>> class_weights(spec.workers,
                                                 std::vector<double>(spec.classes, 0.0));
  if (const auto* ls = std::get_if<LabelSkew>(&spec.skew)) {
    Require(ls->classes_per_worker >= 1 && ls->classes_per_worker <= spec.classes,
            ErrorCode::kInvalidArgument,
            "classes_per_worker must lie in [1, " + std::to_string(spec.classes) + "]");
    p.kind = ls->classes_per_worker == spec.classes ? PartitionKind::kIid
                                                    : PartitionKind::kLabelSkew;
    for (size_t w = 0; w < spec.workers; ++w) {
      for (size_t c = 0; c < ls->classes_per_worker; ++c) {
        class_weights[w][(w * ls->classes_per_worker + c) % spec.classes] = 1.0;
      }
    }
  } else {
    const auto& dir = std::get<DirichletSkew>(spec.skew);
    Require(dir.concentration > 0, ErrorCode::kInvalidArgument,
            "Dirichlet concentration must be positive");
    p.kind = PartitionKind::kDirichlet;
    Rng rng = MakeRng(spec.seed, Stream::kData, {2});
    std::gamma_distribution<double> gamma(dir.concentration, 1.0);
    for (auto& weights : class_weights) {
      double total = 0;
      for (double& v : weights) total += (v = gamma(rng));
      if (total <= 0) weights.assign(spec.classes, 1.0);
    }
  }

  std::vector<double> x(spec.feature_dim);
  for (size_t w = 0; w < spec.workers; ++w) {
    Rng rng = MakeRng(spec.seed, Stream::kData, {3, w});
    std::discrete_distribution<size_t> pick(class_weights[w].begin(), class_weights[w].end());
    Dataset& d = p.workers[w];
    d.feature_dim = spec.feature_dim;
    d.features.reserve(spec.samples_per_worker * spec.feature_dim);
    for (size_t s = 0; s < spec.samples_per_worker; ++s) {
      const size_t label = pick(rng);
      DrawSample(means[label], rng, x);
      d.Append(x, static_cast<double>(label));
    }
  }

  Rng rng = MakeRng(spec.seed, Stream::kData, {4});
  std::uniform_int_distribution<size_t> any_class(0, spec.classes - 1);
  out.test.feature_dim = spec.feature_dim;
  for (size_t s = 0; s < spec.test_samples; ++s) {
    const size_t label = any_class(rng);
    DrawSample(means[label], rng, x);
    out.test.Append(x, static_cast<double>(label));
  }
  return out;
}

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool ParseDouble(const std::string& text, double& value) {
  const std::string t = Trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), value);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(value);
}

}  // namespace

Dataset LoadCsv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw CsvError(ErrorCode::kIo, "cannot open " + path, 0, 0);
  std::string line;
  if (!std::getline(in, line)) throw CsvError(ErrorCode::kParse, path + " has no header row", 0, 0);
  std::vector<std::string> header = SplitCsvLine(line);
  for (auto& h : header) h = Trim(h);

  size_t label = header.size();
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label = c;
      break;
    }
  }
  if (label == header.size()) {
    size_t index = 0;
    const auto [ptr, ec] = std::from_chars(label_column.data(),
                                           label_column.data() + label_column.size(), index);
    if (ec == std::errc() && ptr == label_column.data() + label_column.size() &&
        index < header.size()) {
      label = index;
    } else {
      throw CsvError(ErrorCode::kInvalidArgument, "label column '" + label_column + "' not found",
                     0, 0);
    }
  }
  if (header.size() < 2) throw CsvError(ErrorCode::kParse, "need at least one feature column", 0, 0);

  Dataset data;
  data.feature_dim = header.size() - 1;
  std::vector<double> x(data.feature_dim);
  size_t row = 0;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = SplitCsvLine(line);
    if (cells.size() != header.size()) {
      throw CsvError(ErrorCode::kParse,
                     "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                         " cells, header has " + std::to_string(header.size()),
                     row, 0);
    }
    double y = 0;
    size_t f = 0;
    for (size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!ParseDouble(cells[c], v)) {
        throw CsvError(ErrorCode::kParse,
                       "non-numeric cell at (" + std::to_string(row) + "," +
                           std::to_string(c + 1) + "): '" + cells[c] + "'",
                       row, c + 1);
      }
      if (c == label) {
        y = v;
      } else {
        x[f++] = v;
      }
    }
    data.Append(x, y);
  }
  return data;
}

namespace {

void AppendShortest(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

void WriteCsv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path);
  std::string text;
  for (size_t j = 0; j < data.feature_dim; ++j) text += "x" + std::to_string(j) + ",";
  text += "label\n";
  for (size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) {
      AppendShortest(text, v);
      text += ',';
    }
    AppendShortest(text, data.labels[i]);
    text += '\n';
  }
  out << text;
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path);
}

Histogram GradientHistogram(std::span<const double> g, size_t bins) {
  Require(!g.empty(), ErrorCode::kInvalidArgument, "histogram of an empty vector");
  Require(bins >= 1, ErrorCode::kInvalidArgument, "need at least one bin");
  Histogram h;
  h.n = g.size();
  h.counts.assign(bins, 0);
  const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
  h.lo = *lo;
  h.hi = *hi;
  const double width = (h.hi - h.lo) / static_cast<double>(bins);
  double sum = 0;
  for (double v : g) {
    size_t b = 0;
    if (width > 0) {
      b = static_cast<size_t>((v - h.lo) / width);
      b = std::min(b, bins - 1);
    }
    ++h.counts[b];
    sum += v;
  }
  const double n = static_cast<double>(g.size());
  h.mean = sum / n;
  double m2 = 0, m4 = 0;
  for (double v : g) {
    const double d = v - h.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  h.variance = g.size() > 1 ? m2 / (n - 1) : 0.0;
  m2 /= n;
  m4 /= n;
  h.excess_kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  return h;
}

}  // namespace diffsketch
