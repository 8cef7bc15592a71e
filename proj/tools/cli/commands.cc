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

#include "cli/commands.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "diffsketch/error.h"
#include "diffsketch/privacy.h"
#include "diffsketch/random.h"
#include "diffsketch/sketch.h"

namespace diffsketch::cli {

namespace {

// Owns either a file stream or borrows the caller's stream for "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path != "-" && !path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      Require(static_cast<bool>(*file_), ErrorCode::kIo, "cannot open " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& stream() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

std::string SummaryPath(const OutputOptions& output) {
  if (!output.summary.empty()) return output.summary;
  if (output.out.empty() || output.out == "-") return {};
  return output.out + ".summary.csv";
}

double ParsePositiveEpsilon(const std::string& text) {
  double eps;
  try {
    size_t used = 0;
    eps = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError("--eps expects a positive number or 'inf', got '" + text + "'");
  }
  if (!(eps > 0)) throw UsageError("--eps must be positive");
  return eps;
}

template <typename T>
std::vector<T> ParseList(const std::string& text, const std::string& flag) {
  std::vector<T> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::istringstream cell(item);
    T v;
    if (!(cell >> v) || !cell.eof()) throw UsageError(flag + ": cannot parse '" + item + "'");
    values.push_back(v);
  }
  return values;
}

// ---------------------------------------------------------------- sketch-bench

int SketchBench(const SketchBenchOptions& o, const OutputOptions& output, std::ostream& out) {
  const bool by_error = o.mu.has_value() || o.delta.has_value();
  const bool by_shape = o.t.has_value() || o.k.has_value();
  if (by_error && by_shape) throw UsageError("give either --mu/--delta or --t/--k, not both");
  if (by_error && !(o.mu && o.delta)) throw UsageError("--mu and --delta go together");
  if (by_shape && !(o.t && o.k)) throw UsageError("--t and --k go together");
  if (!by_error && !by_shape) throw UsageError("need --mu and --delta, or --t and --k");
  if (o.n == 0 || o.trials == 0) throw UsageError("--n and --trials must be positive");

  SketchDims dims{.n = o.n};
  double mu, delta;
  if (by_error) {
    const TableShape shape = DimsForError(*o.mu, *o.delta);
    dims.t = shape.t;
    dims.k = shape.k;
    mu = *o.mu;
    delta = *o.delta;
  } else {
    dims.t = *o.t;
    if (*o.k == "n") {
      dims.k = static_cast<uint32_t>(o.n);
    } else {
      try {
        dims.k = static_cast<uint32_t>(std::stoul(*o.k));
      } catch (const std::exception&) {
        throw UsageError("--k expects an integer or 'n'");
      }
    }
    mu = std::sqrt(std::exp(1.0) / dims.k);
    delta = std::exp(-static_cast<double>(dims.t));
  }
  dims.Validate();

  Sink sink(output.out, out);
  RecordWriter writer(sink.stream(), !output.no_timestamp);
  std::normal_distribution<double> normal(0.0, 1.0);
  uint64_t within_total = 0;
  double max_error = 0;
  for (size_t trial = 0; trial < o.trials; ++trial) {
    Rng rng = MakeRng(o.seed, Stream::kBench, {trial});
    std::vector<double> g(o.n, 0.0);
    if (o.sparse) {
      std::uniform_int_distribution<uint64_t> pos(0, o.n - 1);
      g[pos(rng)] = normal(rng);
    } else {
      for (double& v : g) v = normal(rng);
    }
    CountSketch sketch(dims, StreamSeed(o.seed, Stream::kSketchSeed, {trial}));
    sketch.Encode(g);
    const std::vector<double> est = sketch.QueryAll();
    double norm = 0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    uint64_t within = 0;
    double trial_max = 0, support_max = 0;
    std::vector<double> errors(o.n);
    for (uint64_t i = 0; i < o.n; ++i) {
      errors[i] = std::abs(est[i] - g[i]);
      trial_max = std::max(trial_max, errors[i]);
      if (g[i] != 0) support_max = std::max(support_max, errors[i]);
      if (errors[i] <= mu * norm) ++within;
    }
    // Nearest-rank (1 - delta) quantile of the error, relative to the norm.
    const auto rank = static_cast<size_t>(
        std::ceil((1.0 - delta) * static_cast<double>(o.n)));
    const size_t at = std::clamp<size_t>(rank, 1, o.n) - 1;
    std::nth_element(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(at), errors.end());
    const double quantile = norm > 0 ? errors[at] / norm : 0.0;
    within_total += within;
    max_error = std::max(max_error, trial_max);
    Record r = NewRecord("trial");
    r["trial"] = trial;
    r["within_fraction"] = JsonNumber(static_cast<double>(within) / static_cast<double>(o.n));
    r["max_abs_error"] = JsonNumber(trial_max);
    r["support_max_abs_error"] = JsonNumber(support_max);
    r["relative_error_quantile"] = JsonNumber(quantile);
    r["l2_norm"] = JsonNumber(norm);
    writer.Write(std::move(r));
  }
  const double overall =
      static_cast<double>(within_total) / (static_cast<double>(o.n) * static_cast<double>(o.trials));
  Record s = NewRecord("summary");
  s["command"] = "sketch-bench";
  s["t"] = dims.t;
  s["k"] = dims.k;
  s["n"] = dims.n;
  s["mu"] = JsonNumber(mu);
  s["delta"] = JsonNumber(delta);
  s["trials"] = o.trials;
  s["within_fraction"] = JsonNumber(overall);
  s["max_abs_error"] = JsonNumber(max_error);
  s["pass"] = (1.0 - overall) <= delta + 0.01;
  writer.Write(std::move(s));
  return kExitOk;
}

// --------------------------------------------------------------- privacy-sweep

struct SweepPoint {
  uint32_t k = 0;
  double ratio = 0;
  std::optional<double> eps;
  std::string error;
};

int PrivacySweep(const PrivacySweepOptions& o, const OutputOptions& output, std::ostream& out) {
  if (o.k_grid && o.compression_grid) {
    throw UsageError("give either --k-grid or --compression-grid");
  }
  if (o.t == 0) throw UsageError("--t must be positive");
  std::vector<uint32_t> ks;
  if (o.compression_grid) {
    for (double ratio : ParseList<double>(*o.compression_grid, "--compression-grid")) {
      if (!(ratio > 0)) throw UsageError("compression ratios must be positive");
      ks.push_back(BinsForCompression(o.n, o.t, ratio));
    }
  } else if (o.k_grid) {
    ks = ParseList<uint32_t>(*o.k_grid, "--k-grid");
  } else {
    ks = DefaultSweepGrid();
  }
  if (ks.empty()) throw UsageError("grid is empty");

  const GradientStats stats{.alpha = o.alpha, .sigma2 = o.sigma2, .n = o.n};
  std::vector<SweepPoint> points;
  for (uint32_t k : ks) {
    SweepPoint p;
    p.k = k;
    p.ratio = static_cast<double>(o.n) / (static_cast<double>(o.t) * k);
    try {
      p.eps = SketchEpsilon(stats, SketchDims{.t = o.t, .k = k, .n = o.n});
    } catch (const Error& e) {
      p.error = e.what();
    }
    points.push_back(p);
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const SweepPoint& a, const SweepPoint& b) { return a.ratio < b.ratio; });

  Sink sink(output.out, out);
  RecordWriter writer(sink.stream(), !output.no_timestamp);
  size_t violations = 0;
  std::optional<double> previous;  // epsilon of the last valid point; inf if undefined
  for (const SweepPoint& p : points) {
    Record r = NewRecord("sweep_point");
    r["k"] = p.k;
    r["t"] = o.t;
    r["n"] = o.n;
    r["compression_ratio"] = JsonNumber(p.ratio);
    if (!p.error.empty()) {
      r["epsilon"] = nullptr;
      r["error"] = p.error;
    } else {
      r["epsilon"] = p.eps ? JsonNumber(*p.eps) : Record("undefined");
      const double value = p.eps.value_or(std::numeric_limits<double>::infinity());
      if (previous && value > *previous) ++violations;
      previous = value;
    }
    writer.Write(std::move(r));
  }
  Record s = NewRecord("summary");
  s["command"] = "privacy-sweep";
  s["alpha"] = JsonNumber(o.alpha);
  s["sigma2"] = JsonNumber(o.sigma2);
  s["points"] = points.size();
  s["monotone_violations"] = violations;
  s["monotone"] = violations == 0;
  writer.Write(std::move(s));
  return kExitOk;
}

// ----------------------------------------------------------------------- train

Dataset EmptyDataset(size_t feature_dim) {
  Dataset d;
  d.feature_dim = feature_dim;
  return d;
}

Partition SplitIid(const Dataset& data, size_t workers, uint64_t seed) {
  Partition p;
  p.seed = seed;
  p.workers.assign(workers, EmptyDataset(data.feature_dim));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng = MakeRng(seed, Stream::kData, {5});
  std::shuffle(order.begin(), order.end(), rng);
  for (size_t r = 0; r < order.size(); ++r) {
    p.workers[r % workers].Append(data.row(order[r]), data.labels[order[r]]);
  }
  return p;
}

void LoadCsvExperiment(const TrainOptions& o, Experiment& e) {
  const std::string path = o.dataset.substr(4);
  Dataset all = LoadCsv(path, o.label_column);
  if (all.size() < 2 * o.workers) {
    throw UsageError("csv dataset has too few rows for " + std::to_string(o.workers) + " workers");
  }
  if (o.test_fraction < 0 || o.test_fraction >= 1) throw UsageError("--test-fraction must be in [0,1)");
  const std::string loss = o.loss == "auto" ? "least-squares" : o.loss;
  if (loss == "logistic") {
    double max_label = 0;
    for (double y : all.labels) {
      if (y < 0 || y != std::floor(y)) throw UsageError("logistic loss needs integer labels >= 0");
      max_label = std::max(max_label, y);
    }
    e.loss = {LossKind::kLogistic, 0.0, static_cast<size_t>(max_label) + 1};
    if (e.loss.classes < 2) e.loss.classes = 2;
  } else {
    e.loss = {LossKind::kLeastSquares, 0.0, 0};
  }
  // Deterministic holdout: shuffled with the run seed.
  std::vector<size_t> order(all.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng = MakeRng(o.seed, Stream::kData, {6});
  std::shuffle(order.begin(), order.end(), rng);
  const auto test_rows = static_cast<size_t>(o.test_fraction * static_cast<double>(all.size()));
  Dataset train = EmptyDataset(all.feature_dim);
  e.test = EmptyDataset(all.feature_dim);
  for (size_t r = 0; r < order.size(); ++r) {
    (r < test_rows ? e.test : train).Append(all.row(order[r]), all.labels[order[r]]);
  }
  e.partition = SplitIid(train, o.workers, o.seed);
  e.partition.classes = e.loss.classes;
}

}  // namespace

std::vector<uint32_t> DefaultSweepGrid() { return {2, 3, 4, 6, 8, 11, 12, 16, 22, 24, 32}; }

Experiment BuildExperiment(const TrainOptions& o, std::ostream& warn) {
  Experiment e;
  TrainConfig& c = e.config;
  if (o.mode == "distributed-sgd") {
    c.protocol = Protocol::kDistributedSgd;
  } else if (o.mode == "fedavg") {
    c.protocol = Protocol::kFedAvg;
  } else {
    throw UsageError("--mode must be distributed-sgd or fedavg");
  }
  const bool fed = c.protocol == Protocol::kFedAvg;
  if (o.workers == 0 || o.rounds == 0 || o.batch == 0 || o.local_epochs == 0) {
    throw UsageError("--workers, --rounds, --batch and --local-epochs must be positive");
  }
  c.workers = o.workers;
  c.rounds = o.rounds;
  c.batch_size = o.batch;
  c.local_epochs = o.local_epochs;
  c.devices_per_round = o.devices_per_round.value_or(o.workers);
  if (fed && c.devices_per_round > c.workers) {
    throw UsageError("--devices-per-round exceeds --workers");
  }
  if (o.lr_schedule == "const") {
    c.schedule = LrSchedule::kConstant;
    c.lr = o.lr;
  } else if (o.lr_schedule == "inv-sqrt") {
    c.schedule = LrSchedule::kInverseSqrt;
    c.lr = o.step_c.value_or(o.lr);
  } else {
    throw UsageError("--lr-schedule must be const or inv-sqrt");
  }
  if (!(c.lr > 0)) throw UsageError("learning rate must be positive");
  c.eps_target = ParsePositiveEpsilon(o.eps);
  c.pad = o.pad;
  c.compress = !o.uncompressed;
  c.seed = o.seed;
  c.threads = std::max<size_t>(o.threads, 1);
  c.errcorr_fraction = o.errcorr_frac.value_or(fed ? 0.0 : 0.5);
  if (c.errcorr_fraction < 0 || c.errcorr_fraction > 1) {
    throw UsageError("--errcorr-frac must lie in [0, 1]");
  }
  if (fed && c.errcorr_fraction > 0) {
    warn << "warning: error correction is not applied in fedavg mode; --errcorr-frac ignored\n";
    c.errcorr_fraction = 0;
  }

  if (o.dataset == "synth-reg") {
    const size_t dim = o.features.value_or(200);
    RegressionData reg = SynthRegression(o.workers, o.samples_per_worker, dim, o.noise_sd, o.seed);
    e.partition = std::move(reg.partition);
    e.loss = {o.loss == "logistic" ? throw UsageError("synth-reg needs least-squares loss")
                                   : LossKind::kLeastSquares,
              0.0, 0};
  } else if (o.dataset == "synth-cls") {
    if (o.loss == "least-squares") throw UsageError("synth-cls needs logistic loss");
    if (o.classes_per_worker && o.dirichlet) {
      throw UsageError("give at most one of --classes-per-worker and --dirichlet");
    }
    ClassificationSpec spec;
    spec.workers = o.workers;
    spec.samples_per_worker = o.samples_per_worker;
    spec.feature_dim = o.features.value_or(784);
    spec.classes = o.classes;
    spec.separation = o.separation;
    spec.test_samples = o.test_samples;
    spec.seed = o.seed;
    if (o.dirichlet) {
      spec.skew = DirichletSkew{*o.dirichlet};
    } else {
      spec.skew = LabelSkew{o.classes_per_worker.value_or(o.classes)};
    }
    try {
      ClassificationData cls = SynthClassification(spec);
      e.partition = std::move(cls.partition);
      e.test = std::move(cls.test);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::kInvalidArgument) throw UsageError(err.what());
      throw;
    }
    e.loss = {LossKind::kLogistic, 0.0, o.classes};
  } else if (o.dataset.rfind("csv:", 0) == 0) {
    LoadCsvExperiment(o, e);
  } else {
    throw UsageError("--dataset must be synth-reg, synth-cls or csv:PATH");
  }
  e.pooled = e.partition.Pooled();
  e.parameters = ParameterCount(e.loss, e.partition.feature_dim());

  c.t = o.t.value_or(fed ? 10 : 7);
  if (c.t == 0) throw UsageError("--t must be positive");
  if (o.k && o.compression) throw UsageError("give either --k or --compression");
  if (o.k) {
    c.k = *o.k;
    if (c.k == 0) throw UsageError("--k must be positive");
  } else {
    const double ratio = o.compression.value_or(fed ? 20.0 : 50.0);
    if (!(ratio > 0)) throw UsageError("--compression must be positive");
    c.k = BinsForCompression(e.parameters + c.pad, c.t, ratio);
  }
  c.Validate();
  return e;
}

std::vector<RoundMetrics> RunExperiment(Experiment& e, const RoundOptions& round_options,
                                        const RoundCallback& on_round) {
  const TrainConfig& c = e.config;
  std::vector<RoundMetrics> rows;
  SgdState sgd;
  FedAvgState fed;
  if (c.protocol == Protocol::kDistributedSgd) {
    sgd = InitSgd(c, e.parameters);
  } else {
    fed = InitFedAvg(c, e.parameters);
  }
  double normalized = 0;
  for (size_t r = 1; r <= c.rounds; ++r) {
    const RoundOutcome outcome = c.protocol == Protocol::kDistributedSgd
                                     ? SgdRound(sgd, c, e.loss, e.partition, round_options)
                                     : FedAvgRound(fed, c, e.loss, e.partition, round_options);
    // Distributed SGD reports worker 0's replica.
    const std::vector<double>& weights =
        c.protocol == Protocol::kDistributedSgd ? sgd.worker_weights.front() : fed.weights;
    RoundMetrics m;
    m.round = outcome.round;
    m.train_loss = Loss(weights, e.loss, e.pooled);
    if (e.loss.kind == LossKind::kLogistic && !e.test.empty()) {
      m.test_accuracy = Accuracy(weights, e.loss, e.test);
    }
    if (!outcome.privacy.empty()) {
      double sum = 0, max = 0;
      for (const PrivacyReport& p : outcome.privacy) {
        sum += p.eps_attained;
        max = std::max(max, p.eps_attained);
        if (p.noise_added) ++m.noise_added;
      }
      m.eps_mean = sum / static_cast<double>(outcome.privacy.size());
      m.eps_max = max;
    }
    m.participants = outcome.participants.size();
    m.bytes_sent = outcome.bytes_per_worker;
    m.compression_ratio = outcome.compression_ratio;
    normalized += 1.0 / outcome.compression_ratio;
    m.normalized_comm = normalized;
    m.t = outcome.dims.t;
    m.k = outcome.dims.k;
    m.n_padded = outcome.dims.n;
    m.step = outcome.step;
    rows.push_back(m);
    if (on_round) on_round(outcome, m);
  }
  return rows;
}

namespace {

Record ConfigRecord(const Experiment& e, const std::string& command) {
  const TrainConfig& c = e.config;
  Record r = NewRecord("config");
  r["command"] = command;
  r["mode"] = c.protocol == Protocol::kDistributedSgd ? "distributed-sgd" : "fedavg";
  r["workers"] = c.workers;
  r["rounds"] = c.rounds;
  r["batch"] = c.batch_size;
  r["lr"] = JsonNumber(c.lr);
  r["lr_schedule"] = c.schedule == LrSchedule::kConstant ? "const" : "inv-sqrt";
  r["eps_target"] = JsonNumber(c.eps_target);
  r["compress"] = c.compress;
  r["t"] = c.t;
  r["k"] = c.k;
  r["pad"] = c.pad;
  r["errcorr_frac"] = JsonNumber(c.errcorr_fraction);
  r["devices_per_round"] = c.devices_per_round;
  r["local_epochs"] = c.local_epochs;
  r["parameters"] = e.parameters;
  r["loss"] = e.loss.kind == LossKind::kLeastSquares ? "least-squares" : "logistic";
  r["seed"] = c.seed;
  return r;
}

std::string DumpPath(const std::string& pattern, size_t round) {
  const auto at = pattern.find("{round}");
  if (at == std::string::npos) return pattern;
  return pattern.substr(0, at) + std::to_string(round) + pattern.substr(at + 7);
}

int Train(const TrainOptions& o, const OutputOptions& output, std::ostream& out,
          std::ostream& err) {
  Experiment e = BuildExperiment(o, err);
  if (!o.dump_sketch.empty() && !e.config.compress) {
    throw UsageError("--dump-sketch needs a compressed run");
  }
  Sink sink(output.out, out);
  RecordWriter writer(sink.stream(), !output.no_timestamp);
  writer.Write(ConfigRecord(e, "train"));

  RoundOptions round_options;
  round_options.keep_merged_sketch = !o.dump_sketch.empty();
  const bool every_round = o.dump_sketch.find("{round}") != std::string::npos;
  double eps_sum = 0;
  size_t eps_rounds = 0, noised = 0, uploads = 0;
  const auto rows = RunExperiment(e, round_options, [&](const RoundOutcome& outcome,
                                                        const RoundMetrics& m) {
    writer.Write(ToRecord(m));
    if (m.eps_mean) {
      eps_sum += *m.eps_mean;
      ++eps_rounds;
    }
    noised += m.noise_added;
    uploads += m.participants;
    if (outcome.merged && (every_round || outcome.round == e.config.rounds)) {
      WriteSketchFile(DumpPath(o.dump_sketch, outcome.round), *outcome.merged);
    }
  });

  Record f = NewRecord("final");
  f["rounds"] = rows.size();
  f["final_train_loss"] = JsonNumber(rows.back().train_loss);
  f["final_test_accuracy"] = JsonNumber(rows.back().test_accuracy);
  f["eps_mean_over_rounds"] =
      eps_rounds ? JsonNumber(eps_sum / static_cast<double>(eps_rounds)) : Record(nullptr);
  f["noised_upload_fraction"] =
      JsonNumber(static_cast<double>(noised) / static_cast<double>(std::max<size_t>(uploads, 1)));
  f["normalized_comm"] = JsonNumber(rows.back().normalized_comm);
  writer.Write(std::move(f));

  if (const std::string path = SummaryPath(output); !path.empty()) {
    std::ofstream csv(path, std::ios::trunc);
    Require(static_cast<bool>(csv), ErrorCode::kIo, "cannot open " + path);
    WriteSummaryCsv(csv, rows);
  }
  return kExitOk;
}

// ------------------------------------------------------------------- grad-hist

int GradHist(const TrainOptions& o, const std::string& rounds_text, size_t bins,
             const OutputOptions& output, std::ostream& out, std::ostream& err) {
  const std::vector<size_t> wanted = ParseList<size_t>(rounds_text, "--hist-rounds");
  if (wanted.empty()) throw UsageError("--hist-rounds is empty");
  if (bins == 0) throw UsageError("--bins must be positive");
  std::set<size_t> unique;
  for (size_t r : wanted) {
    if (r >= o.rounds) {
      throw UsageError("histogram round " + std::to_string(r) + " is beyond --rounds " +
                       std::to_string(o.rounds));
    }
    if (!unique.insert(r).second) throw UsageError("duplicate histogram round");
  }
  TrainOptions run = o;
  run.rounds = *unique.rbegin() + 1;
  Experiment e = BuildExperiment(run, err);

  Sink sink(output.out, out);
  RecordWriter writer(sink.stream(), !output.no_timestamp);
  writer.Write(ConfigRecord(e, "grad-hist"));
  RoundOptions round_options;
  round_options.keep_local_vectors = true;
  RunExperiment(e, round_options, [&](const RoundOutcome& outcome, const RoundMetrics&) {
    // Round r's histogram is the gradient computed at the start of round r+1.
    const size_t r = outcome.round - 1;
    if (!unique.count(r)) return;
    Rng rng = MakeRng(e.config.seed, Stream::kHistogram, {r});
    std::uniform_int_distribution<size_t> pick(0, outcome.participants.size() - 1);
    const size_t slot = pick(rng);
    const Histogram h = GradientHistogram(outcome.local_vectors[slot], bins);
    Record rec = NewRecord("gradient_histogram");
    rec["round"] = r;
    rec["worker"] = outcome.participants[slot];
    rec["n"] = h.n;
    rec["lo"] = JsonNumber(h.lo);
    rec["hi"] = JsonNumber(h.hi);
    rec["counts"] = h.counts;
    rec["mean"] = JsonNumber(h.mean);
    rec["variance"] = JsonNumber(h.variance);
    rec["excess_kurtosis"] = JsonNumber(h.excess_kurtosis);
    writer.Write(std::move(rec));
  });
  return kExitOk;
}

// ------------------------------------------------------------------- plumbing

void AddOutputOptions(CLI::App& cmd, OutputOptions& output) {
  cmd.add_option("--out", output.out, "Metrics file (JSON lines); '-' for stdout");
  cmd.add_option("--summary", output.summary, "Summary CSV path (default: <out>.summary.csv)");
  cmd.add_flag("--no-timestamp", output.no_timestamp, "Omit timestamps for byte-stable output");
}

void AddTrainOptions(CLI::App& cmd, TrainOptions& o) {
  cmd.add_option("--mode", o.mode, "distributed-sgd | fedavg");
  cmd.add_option("--workers", o.workers, "Workers (devices)");
  cmd.add_option("--rounds", o.rounds, "Communication rounds");
  cmd.add_option("--batch", o.batch, "Mini-batch size");
  cmd.add_option("--lr", o.lr, "Constant learning rate");
  cmd.add_option("--lr-schedule", o.lr_schedule, "const | inv-sqrt");
  cmd.add_option("--step-c", o.step_c, "c of the c/sqrt(i) schedule");
  cmd.add_option("--eps", o.eps, "Per-round target epsilon, or 'inf'");
  cmd.add_option("--t", o.t, "Sketch rows (default 7 sgd, 10 fedavg)");
  cmd.add_option("--k", o.k, "Sketch bins per row");
  cmd.add_option("--compression", o.compression, "Target compression ratio (resolves k)");
  cmd.add_option("--pad", o.pad, "Gaussian padding entries");
  cmd.add_option("--errcorr-frac", o.errcorr_frac, "Fraction zeroed by error correction");
  cmd.add_option("--devices-per-round", o.devices_per_round, "Sampled devices per round (fedavg)");
  cmd.add_option("--local-epochs", o.local_epochs, "Local epochs per round (fedavg)");
  cmd.add_flag("--uncompressed", o.uncompressed, "Send raw vectors: no sketch, no noise");
  cmd.add_option("--dataset", o.dataset, "synth-reg | synth-cls | csv:PATH");
  cmd.add_option("--loss", o.loss, "auto | least-squares | logistic");
  cmd.add_option("--label-column", o.label_column, "CSV label column (name or index)");
  cmd.add_option("--features", o.features, "Synthetic feature dimension");
  cmd.add_option("--classes", o.classes, "Synthetic class count");
  cmd.add_option("--samples-per-worker", o.samples_per_worker, "Synthetic samples per worker");
  cmd.add_option("--test-samples", o.test_samples, "Synthetic test-set size");
  cmd.add_option("--classes-per-worker", o.classes_per_worker, "Label-skew partition");
  cmd.add_option("--dirichlet", o.dirichlet, "Dirichlet label partition concentration");
  cmd.add_option("--separation", o.separation, "Class-mean distance from the origin");
  cmd.add_option("--noise-sd", o.noise_sd, "Label noise for synth-reg");
  cmd.add_option("--test-fraction", o.test_fraction, "CSV holdout fraction");
  cmd.add_option("--seed", o.seed, "Run seed (env DIFFSKETCH_SEED)");
  cmd.add_option("--threads", o.threads, "Worker threads per round");
}

// Precedence: config file < environment < flags. Config entries and the
// environment seed are spliced ahead of the user's flags and every option
// keeps its last value.
std::vector<std::string> MergeSources(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::vector<std::string> merged{args.front()};
  std::vector<std::string> rest;
  std::string config;
  for (size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config.empty()) {
    std::ifstream probe(config);
    if (!probe) throw UsageError("cannot open config file " + config);
    for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(config)) {
      if (item.name.empty() || item.name == "++" || item.name == "--") continue;
      std::string flag = "--" + item.name;
      if (!item.inputs.empty()) {
        std::string joined;
        for (size_t v = 0; v < item.inputs.size(); ++v) joined += (v ? "," : "") + item.inputs[v];
        flag += "=" + joined;
      }
      merged.push_back(flag);
    }
  }
  const std::string& sub = args.front();
  if (const char* env = std::getenv(kSeedEnv); env && *env && sub != "privacy-sweep") {
    merged.push_back(std::string("--seed=") + env);
  }
  merged.insert(merged.end(), rest.begin(), rest.end());
  return merged;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Count Sketch compression, privacy accounting and training experiments",
               "diffsketch"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all");

  OutputOptions output;
  SketchBenchOptions bench;
  PrivacySweepOptions sweep;
  TrainOptions train;
  std::string hist_rounds;
  size_t hist_bins = 50;
  std::string config_unused;

  auto* bench_cmd = app.add_subcommand("sketch-bench", "Empirical error quantiles of a sketch");
  bench_cmd->add_option("--mu", bench.mu, "Target relative error");
  bench_cmd->add_option("--delta", bench.delta, "Failure probability");
  bench_cmd->add_option("--t", bench.t, "Rows (with --k)");
  bench_cmd->add_option("--k", bench.k, "Bins per row, or 'n'");
  bench_cmd->add_option("--n", bench.n, "Vector length");
  bench_cmd->add_option("--trials", bench.trials, "Random vectors");
  bench_cmd->add_flag("--sparse", bench.sparse, "Use 1-sparse vectors");
  bench_cmd->add_option("--seed", bench.seed, "Run seed (env DIFFSKETCH_SEED)");

  auto* sweep_cmd = app.add_subcommand("privacy-sweep", "Analytic epsilon across sketch sizes");
  sweep_cmd->add_option("--alpha", sweep.alpha, "Input bound alpha");
  sweep_cmd->add_option("--sigma2", sweep.sigma2, "Input variance");
  sweep_cmd->add_option("--n", sweep.n, "Effective input length");
  sweep_cmd->add_option("--t", sweep.t, "Rows");
  sweep_cmd->add_option("--k-grid", sweep.k_grid, "Comma-separated bin counts");
  sweep_cmd->add_option("--compression-grid", sweep.compression_grid,
                        "Comma-separated compression ratios");

  auto* train_cmd = app.add_subcommand("train", "Sketched distributed SGD or federated averaging");
  AddTrainOptions(*train_cmd, train);
  train_cmd->add_option("--dump-sketch", train.dump_sketch,
                        "Write the final merged sketch ({round} expands per round)");

  auto* hist_cmd = app.add_subcommand("grad-hist", "Gradient distribution snapshots");
  AddTrainOptions(*hist_cmd, train);
  hist_cmd->add_option("--hist-rounds", hist_rounds, "Comma-separated rounds (0 = fresh model)")
      ->required();
  hist_cmd->add_option("--bins", hist_bins, "Histogram bins");

  for (auto* cmd : {bench_cmd, sweep_cmd, train_cmd, hist_cmd}) {
    AddOutputOptions(*cmd, output);
    cmd->add_option("--config", config_unused, "INI/TOML file of flag defaults");
  }

  try {
    std::vector<std::string> merged = MergeSources(args);
    std::reverse(merged.begin(), merged.end());
    app.parse(merged);
    if (*bench_cmd) return SketchBench(bench, output, out);
    if (*sweep_cmd) return PrivacySweep(sweep, output, out);
    if (*train_cmd) return Train(train, output, out, err);
    if (*hist_cmd) return GradHist(train, hist_rounds, hist_bins, output, out, err);
    return kExitUsage;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace diffsketch::cli
