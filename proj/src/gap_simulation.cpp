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

#include "frp/gap_simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace frp {

GapPattern GapPattern::all(int T) {
  GapPattern p;
  p.kept.resize(T);
  std::iota(p.kept.begin(), p.kept.end(), 0);
  return p;
}

bool GapPattern::is_contiguous() const {
  for (size_t i = 1; i < kept.size(); ++i) {
    if (kept[i] != kept[i - 1] + 1) return false;
  }
  return !kept.empty();
}

void GapPattern::validate(int T) const {
  if (kept.empty()) throw ValidationError("gap pattern keeps no time step");
  for (size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] < 0 || kept[i] >= T) throw ValidationError("gap pattern index out of range");
    if (i > 0 && kept[i] <= kept[i - 1]) {
      throw ValidationError("gap pattern indices must be strictly increasing");
    }
  }
}

void MaskConfig::validate() const {
  if (!(M >= 0.0)) throw ValidationError("mask.M must be >= 0");
  if (!(N < 1.0)) throw ValidationError("mask.N must be < 1");
  if (M > N) throw ValidationError("mask.M must not exceed mask.N (ratio r ~ U(M, N))");
}

int MonthlyAvailability::count() const {
  return static_cast<int>(std::count(available.begin(), available.end(), true));
}

double sample_mask_ratio(const MaskConfig& cfg, Rng& rng) {
  cfg.validate();
  return uniform(rng, cfg.M, cfg.N);
}

int dropped_steps(double r, int T) {
  const long k = std::lround(r * T);
  return static_cast<int>(std::clamp<long>(k, 0, T - 1));
}

SITSample select_steps(const SITSample& sample, std::span<const int> kept) {
  std::vector<int> dates;
  dates.reserve(kept.size());
  for (int t : kept) dates.push_back(sample.dates[t]);
  SITSample out = SITSample::zeros(sample.id, static_cast<int>(kept.size()), sample.C, sample.H,
                                   sample.W, std::move(dates));
  const size_t frame = sample.frame_size();
  const size_t plane = sample.plane_size();
  for (size_t i = 0; i < kept.size(); ++i) {
    std::copy_n(sample.values.begin() + kept[i] * frame, frame, out.values.begin() + i * frame);
    std::copy_n(sample.valid.begin() + kept[i] * plane, plane, out.valid.begin() + i * plane);
  }
  return out;
}

namespace {

GapResult identity(const SITSample& sample) { return {sample, GapPattern::all(sample.T)}; }

void check_range(double lo, double hi, double p) {
  if (!(lo >= 0.0 && lo <= hi && hi < 1.0)) {
    throw ValidationError("augmentation range must satisfy 0 <= lo <= hi < 1");
  }
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p_augment must lie in [0, 1]");
}

GapResult keep_window(const SITSample& sample, int length, Rng& rng) {
  length = std::clamp(length, 1, sample.T);
  const int start = static_cast<int>(uniform_index(rng, static_cast<uint64_t>(sample.T - length + 1)));
  GapPattern p;
  p.kept.resize(length);
  std::iota(p.kept.begin(), p.kept.end(), start);
  return {select_steps(sample, p.kept), p};
}

}  // namespace

GapResult temporal_mask(const SITSample& sample, double r, Rng& rng) {
  if (!(r >= 0.0 && r < 1.0)) throw ValidationError("mask ratio must lie in [0, 1)");
  const int T = sample.T;
  const int k = dropped_steps(r, T);
  if (k == 0) return identity(sample);
  // Partial Fisher-Yates: the first k slots become the dropped set.
  std::vector<int> order(T);
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(uniform_index(rng, static_cast<uint64_t>(T - i)));
    std::swap(order[i], order[j]);
  }
  GapPattern p;
  p.kept.assign(order.begin() + k, order.end());
  std::sort(p.kept.begin(), p.kept.end());
  return {select_steps(sample, p.kept), p};
}

GapResult temporal_dropout(const SITSample& sample, Rng& rng, double lo, double hi,
                           double p_augment) {
  check_range(lo, hi, p_augment);
  if (!(uniform01(rng) < p_augment)) return identity(sample);
  return temporal_mask(sample, uniform(rng, lo, hi), rng);
}

GapResult window_slice(const SITSample& sample, Rng& rng, double lo, double hi, double p_augment) {
  check_range(lo, hi, p_augment);
  if (!(uniform01(rng) < p_augment)) return identity(sample);
  const double w = uniform(rng, lo, hi);
  return keep_window(sample, static_cast<int>(std::lround(w * sample.T)), rng);
}

GapResult window_mask(const SITSample& sample, double missing_ratio, Rng& rng) {
  if (!(missing_ratio >= 0.0 && missing_ratio < 1.0)) {
    throw ValidationError("missing ratio must lie in [0, 1)");
  }
  const int k = dropped_steps(missing_ratio, sample.T);
  if (k == 0) return identity(sample);
  return keep_window(sample, sample.T - k, rng);
}

GapResult apply_availability_pattern(const SITSample& sample, const MonthlyAvailability& availability) {
  if (sample.T != 12) throw ValidationError("availability pattern requires T = 12");
  if (availability.available.size() != 12) {
    throw ValidationError("availability must list 12 months");
  }
  for (int t = 0; t < 12; ++t) {
    if (month_of_day(sample.dates[t]) != t) {
      throw ValidationError("sample dates do not align with calendar months");
    }
  }
  GapPattern p;
  for (int m = 0; m < 12; ++m) {
    if (availability.available[m]) p.kept.push_back(m);
  }
  if (p.kept.empty()) throw ValidationError("availability pattern keeps no month");
  return {select_steps(sample, p.kept), p};
}

std::vector<double> seasonal_keep_profile(double missing_rate) {
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw ValidationError("missing rate must lie in [0, 1)");
  }
  std::vector<double> keep(12);
  for (int m = 0; m < 12; ++m) {
    // Peak missingness in July (m = 6); the cosine weights average to 1.
    const double weight = 1.0 + 0.8 * std::cos(2.0 * std::numbers::pi * (m - 6) / 12.0);
    keep[m] = 1.0 - std::clamp(missing_rate * weight, 0.0, 0.95);
  }
  return keep;
}

MonthlyAvailability sample_availability(std::span<const double> keep_probability, Rng& rng) {
  if (keep_probability.size() != 12) throw ValidationError("keep profile must list 12 months");
  if (std::all_of(keep_probability.begin(), keep_probability.end(),
                  [](double p) { return p <= 0.0; })) {
    throw ValidationError("keep profile can never keep a month");
  }
  MonthlyAvailability out;
  out.cloud_ratio.assign(12, 0.0);
  do {
    out.available.assign(12, false);
    for (int m = 0; m < 12; ++m) out.available[m] = uniform01(rng) < keep_probability[m];
  } while (out.count() == 0);
  return out;
}

}  // namespace frp
