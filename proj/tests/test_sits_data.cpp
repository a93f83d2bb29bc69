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
#include <filesystem>
#include <set>

#include "doctest.h"
#include "frp/sits_data.hpp"
#include "test_util.hpp"

using namespace frp;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_samples = 5;
  s.H = 16;
  s.W = 12;
  s.seed = 3;
  return s;
}

}  // namespace

TEST_CASE("synthetic generator is deterministic and well formed") {
  const Dataset a = generate_synthetic_dataset(small_spec());
  CHECK(a == generate_synthetic_dataset(small_spec()));
  SyntheticSpec other = small_spec();
  other.seed = 4;
  CHECK_FALSE(a == generate_synthetic_dataset(other));
  a.validate();
  CHECK(a.samples.size() == 5);
  CHECK(a.samples[0].sits.id == "s00000");
  CHECK(a.samples[4].sits.id == "s00004");
  CHECK(a.channels() == 4);
  CHECK(a.num_classes() == 4);
  CHECK(a.uniform_length());
  CHECK(a.samples[0].sits.dates == mid_month_days());
}

TEST_CASE("rectangular fields respect the size bounds") {
  SyntheticSpec s = small_spec();
  s.H = s.W = 32;
  const Dataset d = generate_synthetic_dataset(s);
  // Every label run along a row is at least min_field_size long unless two
  // neighbouring fields drew the same class, so only check runs are bounded
  // below by one and classes cover the map.
  std::set<int> seen;
  for (const auto& item : d.samples)
    for (uint8_t c : item.labels.classes) seen.insert(c);
  CHECK(seen.size() == 4);
}

TEST_CASE("phenology curve follows its double logistic") {
  const Phenology p{0.4, 100.0, 250.0, 0.1};
  CHECK(p.evaluate(1.0, 12.0) == doctest::Approx(0.1).epsilon(0.01));
  CHECK(p.evaluate(175.0, 12.0) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(p.evaluate(100.0, 12.0) == doctest::Approx(0.3).epsilon(0.01));
}

TEST_CASE("noise-free generator reproduces the class curves") {
  SyntheticSpec s = small_spec();
  s.noise_std = 0.0;
  const Dataset d = generate_synthetic_dataset(s);
  const auto classes = default_phenology(s.K);
  // Channel 0 has gain 1 and offset 0.
  const auto& item = d.samples[0];
  for (int t = 0; t < s.T; ++t) {
    const int k = item.labels.classes[0];
    CHECK(item.sits.at(t, 0, 0, 0) ==
          doctest::Approx(classes[k].evaluate(item.sits.dates[t], s.slope_days)).epsilon(1e-5));
  }
}

TEST_CASE("spec validation") {
  SyntheticSpec s = small_spec();
  s.K = 1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = small_spec();
  s.dates = {1, 2};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = small_spec();
  s.noise_std = -1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("dataset directory round-trips and reports missing payloads") {
  const auto dir = testutil::temp_dir("dataset_io");
  Dataset d = generate_synthetic_dataset(small_spec());
  d.samples[1].sits.valid[3] = 0;
  save_dataset(d, dir);
  CHECK(load_dataset(dir) == d);

  std::filesystem::remove(dir / "samples" / "s00002.values");
  try {
    load_dataset(dir);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("missing payload for sample 's00002'") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dataset(dir / "nowhere"), FormatError);
}

TEST_CASE("truncated payload is rejected with the declared length") {
  const auto dir = testutil::temp_dir("dataset_trunc");
  const Dataset d = generate_synthetic_dataset(small_spec());
  save_dataset(d, dir);
  std::filesystem::resize_file(dir / "samples" / "s00000.values", 4 * 4 * 16 * 12 * 11);
  try {
    load_dataset(dir);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("manifest declares T=12") != std::string::npos);
  }
}

TEST_CASE("channel normalization matches a two-pass oracle") {
  const Dataset d = generate_synthetic_dataset(small_spec());
  const Dataset n = normalize_channels(d);
  CHECK_THROWS_AS(normalize_channels(n), ValidationError);
  for (int c = 0; c < 4; ++c) {
    double s = 0.0, s2 = 0.0, cnt = 0.0;
    for (const auto& item : n.samples)
      for (int t = 0; t < item.sits.T; ++t)
        for (int y = 0; y < item.sits.H; ++y)
          for (int x = 0; x < item.sits.W; ++x) {
            const double v = item.sits.at(t, c, y, x);
            s += v;
            s2 += v * v;
            cnt += 1;
          }
    CHECK(std::abs(s / cnt) < 1e-5);
    CHECK(std::sqrt(s2 / cnt - (s / cnt) * (s / cnt)) == doctest::Approx(1.0).epsilon(1e-4));
  }
  // Test split reuses the train statistics verbatim.
  const Dataset t = apply_channel_stats(d, n.channel_stats);
  CHECK(t.samples[2].sits.values == n.samples[2].sits.values);
}

TEST_CASE("split is a seeded partition with the requested share") {
  SyntheticSpec s = small_spec();
  s.n_samples = 10;
  s.H = s.W = 4;
  s.min_field_size = 1;
  s.max_field_size = 4;
  const Dataset d = generate_synthetic_dataset(s);
  const auto [tr, te] = split_dataset(d, 0.6, 7);
  CHECK(tr.samples.size() == 6);
  CHECK(te.samples.size() == 4);
  std::set<std::string> ids;
  for (const auto& x : tr.samples) ids.insert(x.sits.id);
  for (const auto& x : te.samples) ids.insert(x.sits.id);
  CHECK(ids.size() == 10);
  const auto [tr2, te2] = split_dataset(d, 0.6, 7);
  CHECK(tr2 == tr);
  const auto [tr3, te3] = split_dataset(d, 0.6, 8);
  CHECK_FALSE(tr3 == tr);
  CHECK_THROWS_AS(split_dataset(d, 1.0, 7), ValidationError);
}
