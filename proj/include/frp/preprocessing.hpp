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

#ifndef FRP_PREPROCESSING_HPP_
#define FRP_PREPROCESSING_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "frp/gap_simulation.hpp"
#include "frp/sits_data.hpp"

namespace frp {

/// Acquisitions of one month.  images is [M][C][H][W]; cloud_masks is
/// [M][H][W] with nonzero meaning cloudy.
struct RasterStack {
  int M = 0;
  int C = 0;
  int H = 0;
  int W = 0;
  std::vector<float> images;
  std::vector<uint8_t> cloud_masks;
  std::vector<int> acquisition_dates;

  void validate() const;
};

struct Composite {
  std::vector<float> values;             // [C][H][W]; 0 where residual_invalid
  std::vector<uint8_t> residual_invalid;  // [H][W]
};

inline constexpr double kMissingThreshold = 0.40;
inline constexpr double kCleanThreshold = 0.20;

/// Fraction of cloudy pixels.  Throws on an empty mask.
double cloud_cover_ratio(std::span<const uint8_t> mask);

/// Per-pixel, per-channel median over cloud-free acquisitions; an even count
/// takes the mean of the two central values.  Pixels cloudy in every
/// acquisition are flagged residual_invalid.
Composite monthly_median_composite(const RasterStack& stack);

/// A month is available iff its ratio <= threshold.
MonthlyAvailability flag_missing_months(std::span<const double> ratios,
                                        double threshold = kMissingThreshold);

/// Fills invalid steps per pixel by linear interpolation in day-of-year
/// between the nearest valid observations (constant extension at the ends)
/// and marks every step valid.  Throws if a pixel is never valid.
SITSample fill_residual_pixels(const SITSample& sits);

// ---------------------------------------------------------------------------
// Raster-stack directories
//
//   <dir>/rasters.json
//   {"schema": 1, "format": "frp-rasters", "channels": C, "height": H,
//    "width": W, "class_names": [...],
//    "samples": [{"id": "...", "labels": "<file>",
//                 "acquisitions": [{"date": doy, "image": "<file>",
//                                   "cloud": "<file>"}, ...]}, ...]}
//
// image files hold float32 [C][H][W], cloud and label files uint8 [H][W];
// all paths are relative to <dir>.

struct RasterAcquisition {
  int date = 0;
  std::vector<float> image;
  std::vector<uint8_t> cloud;
};

struct RasterSample {
  std::string id;
  LabelMap labels;
  std::vector<RasterAcquisition> acquisitions;
};

struct RasterCollection {
  int C = 0;
  int H = 0;
  int W = 0;
  std::vector<std::string> class_names;
  std::vector<RasterSample> samples;
};

void write_raster_directory(const RasterCollection& rasters, const std::filesystem::path& directory);
RasterCollection read_raster_directory(const std::filesystem::path& directory);

/// Turns a complete 12-month dataset into raw cloudy acquisitions:
/// `per_month` acquisitions around each frame's date, each with a random
/// rectangular cloud covering a fraction drawn from U(0, max_cover) and
/// bright cloud values inside it.  Used to exercise the pipeline end to end.
RasterCollection simulate_cloudy_acquisitions(const Dataset& complete, int per_month,
                                              double max_cover, uint64_t seed);

struct PreprocessOptions {
  double missing_threshold = kMissingThreshold;
  double clean_threshold = kCleanThreshold;
};

struct SampleAvailability {
  std::string id;
  MonthlyAvailability months;
  /// Every month present with composite cloud ratio < clean_threshold.
  bool complete = false;
};

struct PreprocessResult {
  Dataset dataset;
  std::vector<SampleAvailability> availability;
};

/// Monthly compositing, missing-month flagging and residual gap filling.
/// Frames are dated mid-month.  Only available months enter the output.
PreprocessResult preprocess_rasters(const RasterCollection& rasters, const PreprocessOptions& options);

}  // namespace frp

#endif  // FRP_PREPROCESSING_HPP_
