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

#ifndef DIFFSKETCH_PRIVACY_H_
#define DIFFSKETCH_PRIVACY_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffsketch/random.h"
#include "diffsketch/sketch.h"

namespace diffsketch {

// Input model of the accountant: entries are treated as i.i.d. N(0, sigma2)
// and bounded by alpha in magnitude.
struct GradientStats {
  double alpha = 1.0;
  double sigma2 = 1.0;
  uint64_t n = 2;  // effective length, padding included
  bool degenerate = false;  // alpha or sigma2 hit the floor
};

inline constexpr double kStatsFloor = 1e-12;
inline constexpr double kDefaultAlphaPercentile = 0.9;

// alpha = nearest-rank `percentile` of |g_i|; sigma2 = unbiased sample
// variance (0 for a single entry); zero values are floored at 1e-12 and
// flagged as degenerate.
GradientStats EstimateStats(std::span<const double> g,
                            double percentile = kDefaultAlphaPercentile);

// Empty when sketch_epsilon is defined for these arguments; otherwise names
// the violated inequality.
std::string EpsilonPreconditionFailure(const GradientStats& stats, const SketchDims& dims);

// X = alpha^2 k (k-1) (1 + ln(n-k)) / (sigma2 (n-2)), with n = stats.n.
double CollisionTerm(const GradientStats& stats, const SketchDims& dims);

// Intrinsic epsilon of a t x k sketch over inputs described by `stats`:
// -t ln(1 - 2X), which is t ln(1 + beta X) at the smallest admissible
// beta = 1 / (1/2 - X). Undefined (nullopt) once X >= 1/2.
// Throws invalid-argument when k < 2, n <= k or n < 3.
std::optional<double> SketchEpsilon(const GradientStats& stats, const SketchDims& dims);

// The same quantity through the beta parameterization; kept for cross-checks.
std::optional<double> SketchEpsilonBetaForm(const GradientStats& stats, const SketchDims& dims);

struct PrivacyReport {
  std::optional<double> eps_sketch;
  double eps_target = 0.0;
  bool noise_added = false;
  double laplace_scale = 0.0;
  double eps_attained = 0.0;

  // Checks the report's internal consistency. An infinite target means "no
  // requirement", which is the only case where an undefined intrinsic epsilon
  // may go without noise.
  bool Consistent() const;
};

// Laplace scale that makes a t-row table eps-DP on its own: replacing one
// input bounded by alpha moves one counter per row by at most 2*alpha.
double LaplaceScaleFor(double alpha, uint32_t t, double eps_target);

// Leaves the sketch untouched when its intrinsic epsilon meets `eps_target`;
// otherwise adds i.i.d. Laplace(0, 2*alpha*t/eps_target) to every counter.
// eps_target may be +infinity. An intrinsic epsilon whose preconditions fail
// counts as undefined.
PrivacyReport ValidateAndNoise(CountSketch& sketch, const GradientStats& stats,
                               double eps_target, Rng& rng);

// g followed by m_pad i.i.d. N(0, stats.sigma2) draws.
std::vector<double> PadWithNoise(std::span<const double> g, uint64_t m_pad,
                                 const GradientStats& stats, Rng& rng);

// Inverse-CDF Laplace(0, b) draw.
double LaplaceSample(double b, Rng& rng);

// Monte-Carlo check of the accountant on a small instance. Two neighboring
// inputs share n-1 entries drawn from N(0, sigma^2) and clipped to
// [-alpha, alpha]; entry 0 is alpha in one and 0 in the other. Each draw uses
// a fresh master seed for both sketches; counter (0, 0) of the two outcome
// streams is binned into `cells` equal-width cells over their joint range, and
// every cell holding at least `min_count` samples on both sides must satisfy
// max(p/q, q/p) <= exp(eps) * slack. An undefined eps bounds nothing.
struct RatioCheckSpec {
  uint32_t t = 1;
  uint32_t k = 2;
  uint64_t n = 64;
  double sigma = 1.0;
  double alpha = 3.0;
  uint64_t draws = 1000000;
  size_t cells = 40;
  uint64_t min_count = 1000;
  double slack = 1.25;
  uint64_t seed = 1;
};

struct RatioCheckReport {
  double collision_term = 0;  // X
  std::optional<double> eps;
  double bound = 0;           // exp(eps) * slack, +inf when eps is undefined
  double max_ratio = 0;       // over the checked cells
  size_t cells_checked = 0;
  bool pass = false;
};

RatioCheckReport EmpiricalRatioCheck(const RatioCheckSpec& spec);

}  // namespace diffsketch

#endif  // DIFFSKETCH_PRIVACY_H_
