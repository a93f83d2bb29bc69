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


#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "frp/gap_simulation.hpp"
#include "test_util.hpp"

using namespace frp;

TEST_CASE("dropped step count rounds and keeps one step") {
  CHECK(dropped_steps(0.0, 12) == 0);
  CHECK(dropped_steps(0.25, 12) == 3);
  CHECK(dropped_steps(0.5, 12) == 6);
  CHECK(dropped_steps(0.75, 12) == 9);
  CHECK(dropped_steps(0.3, 12) == 4);  // 3.6
  CHECK(dropped_steps(0.99, 4) == 3);
  CHECK(dropped_steps(1.0, 1) == 0);
}

TEST_CASE("temporal mask removes steps and keeps their dates") {
  Rng rng(2);
  const SITSample s = testutil::random_sample(12, 3, 4, 5, rng);
  const GapResult g = temporal_mask(s, 0.5, rng);
  CHECK(g.sample.T == 6);
  REQUIRE(g.pattern.kept.size() == 6);
  g.pattern.validate(12);
  g.sample.validate();
  for (int i = 0; i < 6; ++i) {
    const int t = g.pattern.kept[i];
    CHECK(g.sample.dates[i] == s.dates[t]);
    for (int c = 0; c < 3; ++c) CHECK(g.sample.at(i, c, 2, 3) == s.at(t, c, 2, 3));
  }
  const GapResult none = temporal_mask(s, 0.0, rng);
  CHECK(none.sample == s);
  CHECK(none.pattern == GapPattern::all(12));
}

TEST_CASE("temporal mask draws subsets uniformly") {
  Rng rng(17);
  const SITSample s = testutil::random_sample(6, 1, 1, 1, rng);
  // round(0.5 * 6) = 3 dropped, C(6, 3) = 20 subsets.
  std::map<std::vector<int>, int> counts;
  std::vector<int> per_step(6, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto g = temporal_mask(s, 0.5, rng);
    ++counts[g.pattern.kept];
    for (int t : g.pattern.kept) ++per_step[t];
  }
  CHECK(counts.size() == 20);
  double chi2 = 0.0;
  const double expect = n / 20.0;
  for (const auto& [k, c] : counts) chi2 += (c - expect) * (c - expect) / expect;
  // 19 degrees of freedom, 0.999 quantile is about 43.8.
  CHECK(chi2 < 43.8);
  for (int t = 0; t < 6; ++t) CHECK(std::abs(per_step[t] / double(n) - 0.5) < 0.015);
}

TEST_CASE("mask ratio is uniform on [M, N]") {
  MaskConfig cfg;
  Rng rng(8);
  double s = 0.0, lo = 1.0, hi = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double r = sample_mask_ratio(cfg, rng);
    s += r;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(s / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(lo >= 0.25);
  CHECK(hi <= 0.75);
  cfg.M = 0.8;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("temporal dropout applies with the requested probability") {
  Rng rng(4);
  const SITSample s = testutil::random_sample(12, 1, 2, 2, rng);
  int applied = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto g = temporal_dropout(s, rng, 0.25, 0.75, 0.5);
    if (g.sample.T == 12) {
      CHECK(g.sample == s);
      continue;
    }
    ++applied;
    CHECK(g.sample.T >= 3);
    CHECK(g.sample.T <= 9);
  }
  CHECK(applied / double(n) == doctest::Approx(0.5).epsilon(0.03));
  for (int i = 0; i < 100; ++i) CHECK(temporal_dropout(s, rng, 0.25, 0.75, 0.0).sample == s);
}

TEST_CASE("window slice and window mask keep one contiguous run") {
  Rng rng(5);
  const SITSample s = testutil::random_sample(12, 1, 2, 2, rng);
  std::vector<int> starts(12, 0);
  for (int i = 0; i < 12000; ++i) {
    const auto g = window_mask(s, 0.5, rng);
    CHECK(g.pattern.is_contiguous());
    CHECK(g.sample.T == 6);
    ++starts[g.pattern.kept.front()];
  }
  // Seven feasible starts for a 6-step window in 12.
  for (int t = 0; t < 7; ++t) CHECK(std::abs(starts[t] / 12000.0 - 1.0 / 7) < 0.015);
  for (int t = 7; t < 12; ++t) CHECK(starts[t] == 0);
  for (int i = 0; i < 1000; ++i) {
    const auto g = window_slice(s, rng, 0.25, 0.75, 1.0);
    CHECK(g.pattern.is_contiguous());
    CHECK(g.sample.T >= 3);
    CHECK(g.sample.T <= 9);
  }
}

TEST_CASE("availability pattern keeps flagged months") {
  Rng rng(6);
  SITSample s = testutil::random_sample(12, 1, 2, 2, rng);
  s.dates = mid_month_days();
  MonthlyAvailability a;
  a.available = {true, false, true, true, false, false, false, true, true, true, true, false};
  a.cloud_ratio.assign(12, 0.0);
  const auto g = apply_availability_pattern(s, a);
  CHECK(g.pattern.kept == std::vector<int>{0, 2, 3, 7, 8, 9, 10});
  CHECK(a.count() == 7);
}

TEST_CASE("seasonal keep profile averages the missing rate") {
  const auto keep = seasonal_keep_profile(0.3);
  const double mean_missing = 1.0 - std::accumulate(keep.begin(), keep.end(), 0.0) / 12.0;
  CHECK(mean_missing == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(keep[6] < keep[0]);
  Rng rng(3);
  std::vector<int> kept(12, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto a = sample_availability(keep, rng);
    CHECK(a.count() >= 1);
    for (int m = 0; m < 12; ++m) kept[m] += a.available[m];
  }
  for (int m = 0; m < 12; ++m) CHECK(std::abs(kept[m] / double(n) - keep[m]) < 0.015);
}
