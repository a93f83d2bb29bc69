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
#include <sstream>

#include "doctest.h"
#include "frp/common.hpp"
#include "test_util.hpp"

using namespace frp;

TEST_CASE("uniform helpers stay in range and are reproducible") {
  Rng a(1), b(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == uniform01(b));
    const uint64_t k = uniform_index(a, 7);
    CHECK(k < 7);
    uniform_index(b, 7);
  }
  CHECK_THROWS_AS(uniform_index(a, 0), ValidationError);
}

TEST_CASE("standard_normal has unit moments") {
  Rng rng(5);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(rng);
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("rng state round-trips") {
  Rng rng(99);
  for (int i = 0; i < 10; ++i) rng();
  Rng copy = rng_from_state(rng_state(rng));
  for (int i = 0; i < 10; ++i) CHECK(copy() == rng());
  CHECK_THROWS(rng_from_state("not a state"));
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(0, 0) != mix_seed(0, 1));
}

TEST_CASE("fingerprint is 64-bit FNV-1a") {
  // Published FNV-1a 64 test vectors.
  CHECK(fingerprint("") == "cbf29ce484222325");
  CHECK(fingerprint("a") == "af63dc4c8601ec8c");
  CHECK(fingerprint("foobar") == "85944171f73967e8");
}

TEST_CASE("binary files round-trip") {
  const auto dir = testutil::temp_dir("common_io");
  const std::vector<float> f = {1.5f, -0.0f, 3.25e-8f, 1e30f};
  write_f32_file(dir / "a.bin", f);
  CHECK(read_f32_file(dir / "a.bin") == f);
  const std::vector<uint8_t> u = {0, 1, 255};
  write_u8_file(dir / "b.bin", u);
  CHECK(read_u8_file(dir / "b.bin") == u);
  write_text_file(dir / "c.txt", "hello\n");
  CHECK(read_text_file(dir / "c.txt") == "hello\n");
  CHECK_THROWS(read_f32_file(dir / "missing.bin"));
}

TEST_CASE("calendar helpers") {
  CHECK(month_of_day(1) == 0);
  CHECK(month_of_day(31) == 0);
  CHECK(month_of_day(32) == 1);
  CHECK(month_of_day(59) == 1);
  CHECK(month_of_day(60) == 2);
  CHECK(month_of_day(365) == 11);
  CHECK(month_of_day(366) == 11);
  const auto mid = mid_month_days();
  REQUIRE(mid.size() == 12);
  for (int m = 0; m < 12; ++m) CHECK(month_of_day(mid[m]) == m);
}
