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

#include "diffsketch/privacy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "diffsketch/error.h"
#include "diffsketch/random.h"

namespace diffsketch {

GradientStats EstimateStats(std::span<const double> g, double percentile) {
  Require(!g.empty(), ErrorCode::kInvalidArgument, "cannot estimate statistics of an empty vector");
  Require(percentile > 0 && percentile <= 1, ErrorCode::kInvalidArgument,
          "percentile must lie in (0, 1]");
  std::vector<double> magnitudes(g.size());
  double sum = 0;
  for (size_t i = 0; i < g.size(); ++i) {
    Require(std::isfinite(g[i]), ErrorCode::kInvalidArgument, "non-finite gradient entry");
    magnitudes[i] = std::abs(g[i]);
    sum += g[i];
  }
  // Nearest rank: the ceil(p*N)-th smallest magnitude.
  const auto rank = static_cast<size_t>(
      std::clamp(std::ceil(percentile * static_cast<double>(g.size())), 1.0,
                 static_cast<double>(g.size())));
  std::nth_element(magnitudes.begin(), magnitudes.begin() + (rank - 1), magnitudes.end());

  GradientStats stats;
  stats.alpha = magnitudes[rank - 1];
  stats.n = g.size();
  const double mean = sum / static_cast<double>(g.size());
  double ss = 0;
  for (double v : g) ss += (v - mean) * (v - mean);
  stats.sigma2 = g.size() > 1 ? ss / static_cast<double>(g.size() - 1) : 0.0;
  if (stats.alpha < kStatsFloor) {
    stats.alpha = kStatsFloor;
    stats.degenerate = true;
  }
  if (stats.sigma2 < kStatsFloor) {
    stats.sigma2 = kStatsFloor;
    stats.degenerate = true;
  }
  return stats;
}

std::string EpsilonPreconditionFailure(const GradientStats& stats, const SketchDims& dims) {
  if (dims.k < 2) return "k >= 2";
  if (stats.n < 3) return "n >= 3";
  if (stats.n <= dims.k) return "n > k";
  if (!(stats.alpha > 0)) return "alpha > 0";
  if (!(stats.sigma2 > 0)) return "sigma2 > 0";
  if (dims.t < 1) return "t >= 1";
  return {};
}

double CollisionTerm(const GradientStats& stats, const SketchDims& dims) {
  const std::string failure = EpsilonPreconditionFailure(stats, dims);
  Require(failure.empty(), ErrorCode::kInvalidArgument, "precondition violated: " + failure);
  const double k = dims.k;
  const double n = static_cast<double>(stats.n);
  return stats.alpha * stats.alpha * k * (k - 1) * (1 + std::log(n - k)) /
         (stats.sigma2 * (n - 2));
}

std::optional<double> SketchEpsilon(const GradientStats& stats, const SketchDims& dims) {
  const double x = CollisionTerm(stats, dims);
  if (!(x < 0.5)) return std::nullopt;
  return -static_cast<double>(dims.t) * std::log1p(-2 * x);
}

std::optional<double> SketchEpsilonBetaForm(const GradientStats& stats, const SketchDims& dims) {
  const double x = CollisionTerm(stats, dims);
  if (!(x < 0.5)) return std::nullopt;
  const double beta = 1 / (0.5 - x);
  return static_cast<double>(dims.t) * std::log1p(beta * x);
}

bool PrivacyReport::Consistent() const {
  if (!(eps_target > 0)) return false;
  if (noise_added) return eps_attained == eps_target && laplace_scale > 0;
  if (std::isinf(eps_target) && !eps_sketch) return std::isinf(eps_attained);
  return eps_sketch.has_value() && *eps_sketch <= eps_target && eps_attained == *eps_sketch &&
         laplace_scale == 0;
}

double LaplaceScaleFor(double alpha, uint32_t t, double eps_target) {
  Require(eps_target > 0, ErrorCode::kInvalidArgument, "target epsilon must be positive");
  return 2 * alpha * t / eps_target;
}

PrivacyReport ValidateAndNoise(CountSketch& sketch, const GradientStats& stats,
                               double eps_target, Rng& rng) {
  Require(eps_target > 0, ErrorCode::kInvalidArgument, "target epsilon must be positive");
  Require(stats.n >= sketch.dims().n, ErrorCode::kInvalidArgument,
          "statistics describe fewer entries than the sketch encodes");
  PrivacyReport report;
  report.eps_target = eps_target;
  if (EpsilonPreconditionFailure(stats, sketch.dims()).empty()) {
    report.eps_sketch = SketchEpsilon(stats, sketch.dims());
  }
  if (report.eps_sketch && *report.eps_sketch <= eps_target) {
    report.eps_attained = *report.eps_sketch;
    return report;
  }
  if (std::isinf(eps_target)) {
    report.eps_attained = std::numeric_limits<double>::infinity();
    return report;
  }
  report.noise_added = true;
  report.laplace_scale = LaplaceScaleFor(stats.alpha, sketch.dims().t, eps_target);
  report.eps_attained = eps_target;
  for (double& c : sketch.mutable_counters()) c += LaplaceSample(report.laplace_scale, rng);
  return report;
}

std::vector<double> PadWithNoise(std::span<const double> g, uint64_t m_pad,
                                 const GradientStats& stats, Rng& rng) {
  std::vector<double> out(g.begin(), g.end());
  out.reserve(g.size() + m_pad);
  std::normal_distribution<double> normal(0.0, std::sqrt(stats.sigma2));
  for (uint64_t i = 0; i < m_pad; ++i) out.push_back(normal(rng));
  return out;
}

double LaplaceSample(double b, Rng& rng) {
  Require(b > 0 && std::isfinite(b), ErrorCode::kInvalidArgument,
          "Laplace scale must be positive and finite");
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  double u = uniform(rng);
  while (u == -0.5) u = uniform(rng);
  const double s = (u > 0) - (u < 0);
  return -b * s * std::log1p(-2 * std::abs(u));
}

RatioCheckReport EmpiricalRatioCheck(const RatioCheckSpec& spec) {
  Require(spec.draws > 0 && spec.cells > 0, ErrorCode::kInvalidArgument,
          "need at least one draw and one cell");
  Require(spec.alpha > 0 && spec.sigma > 0 && spec.slack >= 1, ErrorCode::kInvalidArgument,
          "alpha and sigma must be positive, slack at least 1");
  const SketchDims dims{spec.t, spec.k, spec.n};
  dims.Validate();
  const GradientStats stats{.alpha = spec.alpha, .sigma2 = spec.sigma * spec.sigma, .n = spec.n};

  RatioCheckReport report;
  report.collision_term = CollisionTerm(stats, dims);
  report.eps = SketchEpsilon(stats, dims);
  report.bound = report.eps ? std::exp(*report.eps) * spec.slack
                            : std::numeric_limits<double>::infinity();

  Rng data_rng = MakeRng(spec.seed, Stream::kData, {spec.n});
  std::normal_distribution<double> normal(0.0, spec.sigma);
  std::vector<double> with(spec.n);
  for (double& v : with) v = std::clamp(normal(data_rng), -spec.alpha, spec.alpha);
  with[0] = spec.alpha;
  std::vector<double> without = with;
  without[0] = 0.0;

  std::vector<double> a(spec.draws), b(spec.draws);
  for (uint64_t d = 0; d < spec.draws; ++d) {
    const uint64_t master = StreamSeed(spec.seed, Stream::kSketchSeed, {d});
    CountSketch s1(dims, master), s2(dims, master);
    s1.Encode(with);
    s2.Encode(without);
    a[d] = s1.counter(0, 0);
    b[d] = s2.counter(0, 0);
  }
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  const double width = hi > lo ? (hi - lo) / static_cast<double>(spec.cells) : 1.0;
  auto cell = [&](double v) {
    return std::min(spec.cells - 1, static_cast<size_t>((v - lo) / width));
  };
  std::vector<uint64_t> ha(spec.cells, 0), hb(spec.cells, 0);
  for (uint64_t d = 0; d < spec.draws; ++d) {
    ++ha[cell(a[d])];
    ++hb[cell(b[d])];
  }
  for (size_t c = 0; c < spec.cells; ++c) {
    if (ha[c] < spec.min_count || hb[c] < spec.min_count) continue;
    const double ratio = static_cast<double>(ha[c]) / static_cast<double>(hb[c]);
    report.max_ratio = std::max({report.max_ratio, ratio, 1.0 / ratio});
    ++report.cells_checked;
  }
  report.pass = report.max_ratio <= report.bound;
  return report;
}

}  // namespace diffsketch
