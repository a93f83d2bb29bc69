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

#include "doctest.h"
#include "frp/gap_simulation.hpp"
#include "frp/interpolation.hpp"
#include "test_util.hpp"

using namespace frp;

namespace {

// Linear scan oracle for one missing date.
double oracle(const std::vector<int>& d, const std::vector<double>& v, int date, ImputeMethod m) {
  int prev = -1, next = -1;
  for (int i = 0; i < static_cast<int>(d.size()); ++i) {
    if (d[i] <= date) prev = i;
    if (d[i] >= date && next < 0) next = i;
  }
  switch (m) {
    case ImputeMethod::kLinear:
      if (prev < 0) return v[next];
      if (next < 0) return v[prev];
      if (d[next] == d[prev]) return v[prev];
      return v[prev] + (v[next] - v[prev]) * (date - d[prev]) / double(d[next] - d[prev]);
    case ImputeMethod::kClosest:
      if (prev < 0) return v[next];
      if (next < 0) return v[prev];
      return (date - d[prev] <= d[next] - date) ? v[prev] : v[next];
    case ImputeMethod::kLast:
      return prev >= 0 ? v[prev] : v[next];
  }
  return 0.0;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (auto m : {ImputeMethod::kLinear, ImputeMethod::kClosest, ImputeMethod::kLast})
    CHECK(impute_method_from_string(to_string(m)) == m);
  CHECK(to_string(ImputeMethod::kLinear) == "linear-in");
  CHECK_THROWS(impute_method_from_string("cubic"));
}

TEST_CASE("fill rules on a hand example") {
  const std::vector<int> d = {46, 89};
  const std::vector<double> v = {10.0, 13.0};
  // 10 + 3 * 28 / 43
  CHECK(apply_fill_rule(fill_rule(d, 74, ImputeMethod::kLinear), v) == doctest::Approx(11.953488));
  CHECK(apply_fill_rule(fill_rule(d, 74, ImputeMethod::kClosest), v) == 13.0);
  CHECK(apply_fill_rule(fill_rule(d, 74, ImputeMethod::kLast), v) == 10.0);
  CHECK(apply_fill_rule(fill_rule(d, 20, ImputeMethod::kLinear), v) == 10.0);
  CHECK(apply_fill_rule(fill_rule(d, 200, ImputeMethod::kLinear), v) == 13.0);
  CHECK(apply_fill_rule(fill_rule(d, 20, ImputeMethod::kLast), v) == 10.0);
  // Equidistant: 67.5 is not a day, so use 46/88 and 67.
  const std::vector<int> e = {46, 88};
  CHECK(apply_fill_rule(fill_rule(e, 67, ImputeMethod::kClosest), v) == 10.0);
}

TEST_CASE("imputation matches the brute-force oracle") {
  Rng rng(21);
  for (auto m : {ImputeMethod::kLinear, ImputeMethod::kClosest, ImputeMethod::kLast}) {
    for (int rep = 0; rep < 20; ++rep) {
      const SITSample full = testutil::random_sample(10, 2, 3, 3, rng);
      const GapResult g = temporal_mask(full, uniform(rng, 0.1, 0.9), rng);
      const SITSample out = impute(g.sample, g.pattern, full.dates, m);
      REQUIRE(out.T == 10);
      CHECK(out.dates == full.dates);
      std::vector<bool> kept(10, false);
      for (int t : g.pattern.kept) kept[t] = true;
      for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 3; ++y)
          for (int x = 0; x < 3; ++x) {
            std::vector<double> v;
            for (int i = 0; i < g.sample.T; ++i) v.push_back(g.sample.at(i, c, y, x));
            for (int t = 0; t < 10; ++t) {
              if (kept[t]) {
                CHECK(out.at(t, c, y, x) == full.at(t, c, y, x));
              } else {
                CHECK(out.at(t, c, y, x) ==
                      doctest::Approx(oracle(g.sample.dates, v, full.dates[t], m)).epsilon(1e-5));
              }
            }
          }
    }
  }
}

TEST_CASE("linear imputation is exact on affine series") {
  Rng rng(9);
  SITSample full = testutil::random_sample(12, 1, 2, 2, rng);
  for (int t = 0; t < 12; ++t)
    for (int p = 0; p < 4; ++p) full.values[t * 4 + p] = static_cast<float>(0.5 + 0.01 * full.dates[t] + 0.1 * p);
  GapPattern pat;
  pat.kept = {0, 3, 4, 8, 11};
  const SITSample masked = select_steps(full, pat.kept);
  const SITSample out = impute(masked, pat, full.dates, ImputeMethod::kLinear);
  for (size_t i = 0; i < full.values.size(); ++i) CHECK(out.values[i] == doctest::Approx(full.values[i]).epsilon(1e-6));
}
