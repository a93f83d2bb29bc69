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


// Shared helpers for the unit tests.

#ifndef FRP_TESTS_TEST_UTIL_HPP_
#define FRP_TESTS_TEST_UTIL_HPP_

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "frp/common.hpp"
#include "frp/sits_data.hpp"

namespace testutil {

/// Random values, strictly increasing dates in [1, 365].
inline frp::SITSample random_sample(int T, int C, int H, int W, frp::Rng& rng) {
  std::vector<int> days(365);
  for (int i = 0; i < 365; ++i) days[i] = i + 1;
  for (int i = 0; i < T; ++i) std::swap(days[i], days[i + frp::uniform_index(rng, 365 - i)]);
  std::vector<int> dates(days.begin(), days.begin() + T);
  std::sort(dates.begin(), dates.end());
  frp::SITSample s =
      frp::SITSample::zeros("r" + std::to_string(frp::uniform_index(rng, 1000000)), T, C, H, W, dates);
  for (auto& v : s.values) v = static_cast<float>(frp::uniform(rng, -1.0, 1.0));
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("frp_test_" + name + "_" + std::to_string(getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil

#endif  // FRP_TESTS_TEST_UTIL_HPP_
