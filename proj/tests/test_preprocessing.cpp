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
#include "frp/preprocessing.hpp"
#include "test_util.hpp"

using namespace frp;

namespace {

RasterStack stack_1x2(std::vector<float> images, std::vector<uint8_t> clouds) {
  RasterStack s;
  s.C = 1;
  s.H = 1;
  s.W = 2;
  s.M = static_cast<int>(clouds.size() / 2);
  s.images = std::move(images);
  s.cloud_masks = std::move(clouds);
  for (int m = 0; m < s.M; ++m) s.acquisition_dates.push_back(10 + m);
  return s;
}

}  // namespace

TEST_CASE("cloud cover ratio") {
  const std::vector<uint8_t> m = {0, 1, 1, 0, 0};
  CHECK(cloud_cover_ratio(m) == doctest::Approx(0.4));
  CHECK_THROWS(cloud_cover_ratio(std::vector<uint8_t>{}));
}

TEST_CASE("median composite over cloud-free acquisitions") {
  // Pixel 0: clear values 3, 1, 2 (and 9 under cloud).  Pixel 1: clear 4, 1, 3, 2.
  const auto c = monthly_median_composite(stack_1x2({3, 4, 1, 1, 9, 3, 2, 2}, {0, 0, 0, 0, 1, 0, 0, 0}));
  CHECK(c.values[0] == 2.0f);
  CHECK(c.values[1] == 2.5f);
  CHECK(c.residual_invalid == std::vector<uint8_t>{0, 0});
  const auto d = monthly_median_composite(stack_1x2({5, 6, 7, 8}, {1, 0, 1, 0}));
  CHECK(d.residual_invalid == std::vector<uint8_t>{1, 0});
  CHECK(d.values[0] == 0.0f);
  CHECK(d.values[1] == 7.0f);
}

TEST_CASE("missing months use an inclusive threshold") {
  std::vector<double> r(12, 0.0);
  r[2] = 0.40;
  r[3] = 0.4000001;
  r[5] = 1.0;
  const auto a = flag_missing_months(r);
  CHECK(a.available[2]);
  CHECK_FALSE(a.available[3]);
  CHECK_FALSE(a.available[5]);
  CHECK(a.count() == 10);
  CHECK(flag_missing_months(r, 0.5).count() == 11);
}

TEST_CASE("residual pixels are filled linearly in time") {
  SITSample s = SITSample::zeros("x", 3, 1, 1, 2, {10, 20, 40});
  s.values = {1, 5, 99, 6, 4, 7};
  s.valid = {1, 0, 0, 1, 1, 1};
  const auto f = fill_residual_pixels(s);
  CHECK(f.all_valid());
  CHECK(f.values[2] == doctest::Approx(2.0));  // 1 + 3 * 10 / 30
  CHECK(f.values[1] == 6.0f);                  // leading gap takes the next value
  CHECK(f.values[3] == 6.0f);
  s.valid = {0, 0, 0, 1, 0, 1};
  CHECK_THROWS(fill_residual_pixels(s));
}

TEST_CASE("cloud-free acquisitions reproduce the source dataset") {
  SyntheticSpec spec;
  spec.n_samples = 2;
  spec.H = spec.W = 8;
  const Dataset d = generate_synthetic_dataset(spec);
  const auto rasters = simulate_cloudy_acquisitions(d, 3, 0.0, 1);
  const auto out = preprocess_rasters(rasters, {});
  CHECK(out.dataset == d);
  for (const auto& a : out.availability) {
    CHECK(a.complete);
    CHECK(a.months.count() == 12);
  }
}

TEST_CASE("cloudy acquisitions drop months and stay finite") {
  SyntheticSpec spec;
  spec.n_samples = 3;
  spec.H = spec.W = 8;
  const Dataset d = generate_synthetic_dataset(spec);
  const auto dir = testutil::temp_dir("rasters");
  write_raster_directory(simulate_cloudy_acquisitions(d, 1, 0.9, 4), dir);
  const auto rasters = read_raster_directory(dir);
  const auto out = preprocess_rasters(rasters, {});
  out.dataset.validate();
  int dropped = 0;
  for (size_t i = 0; i < out.dataset.samples.size(); ++i) {
    const auto& s = out.dataset.samples[i].sits;
    CHECK(s.all_valid());
    CHECK(s.T == out.availability[i].months.count());
    dropped += 12 - s.T;
  }
  CHECK(dropped > 0);
}
