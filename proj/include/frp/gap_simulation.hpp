// Copyright 2026 The FRP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FRP_GAP_SIMULATION_HPP_
#define FRP_GAP_SIMULATION_HPP_

#include <span>
#include <vector>

#include "frp/common.hpp"
#include "frp/sits_data.hpp"

namespace frp {

/// Indices (into the complete sequence) of the time steps that survive.
struct GapPattern {
  std::vector<int> kept;

  static GapPattern all(int T);
  bool is_contiguous() const;
  void validate(int T) const;

  bool operator==(const GapPattern&) const = default;
};

/// Mask ratio range; the ratio is drawn as r ~ U(M, N).
struct MaskConfig {
  double M = 0.25;
  double N = 0.75;
  uint64_t seed = 0;

  void validate() const;
};

struct MonthlyAvailability {
  std::vector<bool> available;     // 12 entries
  std::vector<double> cloud_ratio;  // 12 entries, informative only

  int count() const;
};

struct GapResult {
  SITSample sample;
  GapPattern pattern;
};

double sample_mask_ratio(const MaskConfig& cfg, Rng& rng);

/// Number of dropped steps: round(r * T) clamped to [0, T - 1].
int dropped_steps(double r, int T);

/// Sub-sequence of `sample` at the given sorted indices (values and dates
/// copied unchanged).
SITSample select_steps(const SITSample& sample, std::span<const int> kept);

/// Drops dropped_steps(r, T) time steps chosen uniformly without replacement.
GapResult temporal_mask(const SITSample& sample, double r, Rng& rng);

/// With probability p_augment applies temporal_mask with r ~ U(lo, hi);
/// otherwise returns the input unchanged.
GapResult temporal_dropout(const SITSample& sample, Rng& rng, double lo = 0.25, double hi = 0.75,
                           double p_augment = 0.5);

/// With probability p_augment keeps one contiguous window of round(w * T)
/// steps, w ~ U(lo, hi), start uniform over feasible positions.
GapResult window_slice(const SITSample& sample, Rng& rng, double lo = 0.25, double hi = 0.75,
                       double p_augment = 0.5);

/// Contiguous window leaving T - dropped_steps(missing_ratio, T) steps, start
/// uniform.  Used by the window evaluation mode.
GapResult window_mask(const SITSample& sample, double missing_ratio, Rng& rng);

/// Keeps exactly the months flagged available.  Requires T = 12 with step t
/// falling in month t.
GapResult apply_availability_pattern(const SITSample& sample, const MonthlyAvailability& availability);

/// Per-month keep probabilities with missingness concentrated in summer;
/// the mean missing probability is approximately `missing_rate`.
std::vector<double> seasonal_keep_profile(double missing_rate);

/// Draws each month independently with its keep probability; redraws in the
/// (rare) event that no month survives.
MonthlyAvailability sample_availability(std::span<const double> keep_probability, Rng& rng);

}  // namespace frp

#endif  // FRP_GAP_SIMULATION_HPP_
