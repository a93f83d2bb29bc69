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

#ifndef FRP_SITS_DATA_HPP_
#define FRP_SITS_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "frp/common.hpp"

namespace frp {

/// One satellite image time series.  values is laid out [T][C][H][W],
/// valid is [T][H][W] (nonzero = observed).
struct SITSample {
  std::string id;
  int T = 0;
  int C = 0;
  int H = 0;
  int W = 0;
  std::vector<float> values;
  std::vector<int> dates;
  std::vector<uint8_t> valid;

  static SITSample zeros(std::string id, int T, int C, int H, int W, std::vector<int> dates);

  size_t frame_size() const { return static_cast<size_t>(C) * H * W; }
  size_t plane_size() const { return static_cast<size_t>(H) * W; }
  float& at(int t, int c, int y, int x) {
    return values[((static_cast<size_t>(t) * C + c) * H + y) * W + x];
  }
  float at(int t, int c, int y, int x) const {
    return values[((static_cast<size_t>(t) * C + c) * H + y) * W + x];
  }
  bool is_valid(int t, int y, int x) const {
    return valid[(static_cast<size_t>(t) * H + y) * W + x] != 0;
  }
  bool all_valid() const;

  /// Throws ValidationError if any structural invariant is broken.
  void validate() const;

  bool operator==(const SITSample&) const = default;
};

struct LabelMap {
  int H = 0;
  int W = 0;
  int K = 0;
  std::vector<uint8_t> classes;  // [H][W]
  std::vector<std::string> class_names;

  size_t size() const { return classes.size(); }
  void validate() const;

  bool operator==(const LabelMap&) const = default;
};

struct LabeledSample {
  SITSample sits;
  LabelMap labels;

  bool operator==(const LabeledSample&) const = default;
};

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;

  bool empty() const { return mean.empty(); }
  bool operator==(const ChannelStats&) const = default;
};

enum class Split { kTrain, kTest };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct Dataset {
  std::vector<LabeledSample> samples;
  Split split = Split::kTrain;
  ChannelStats channel_stats;  // empty until normalized

  int channels() const;
  int num_classes() const;
  std::vector<std::string> class_names() const;
  /// True when every sample has the same number of time steps.
  bool uniform_length() const;
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// Synthetic generator

/// Double-logistic seasonal curve: base + amplitude * (rise(start) - fall(end)).
struct Phenology {
  double amplitude = 0.4;
  double season_start = 100.0;
  double season_end = 250.0;
  double base = 0.15;

  double evaluate(double day, double slope_days) const;
};

enum class FieldGeometry { kRectangles, kVoronoi };

struct SyntheticSpec {
  int n_samples = 8;
  int T = 12;
  int C = 4;
  int H = 32;
  int W = 32;
  int K = 4;
  uint64_t seed = 0;
  /// One entry per class; empty selects default_phenology(K).
  std::vector<Phenology> classes;
  /// Acquisition dates; empty selects mid-month days (T = 12) or an evenly
  /// spaced grid.
  std::vector<int> dates;
  double noise_std = 0.05;
  FieldGeometry field_geometry = FieldGeometry::kRectangles;
  /// Logistic transition width in days.
  double slope_days = 12.0;
  /// Per-field uniform shift of season start/end, in days (+-).
  double date_jitter = 0.0;
  /// Per-field relative amplitude jitter (+-).
  double amplitude_jitter = 0.0;
  int min_field_size = 4;
  int max_field_size = 16;

  void validate() const;
};

/// Seasonally staggered default classes: class 0 is a weak background
/// signal, classes 1..K-1 have growing seasons spread over the year.
std::vector<Phenology> default_phenology(int K);

/// Deterministic in spec (the seed included).  Sample ids are "s00000" etc.
Dataset generate_synthetic_dataset(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// On-disk format
//
//   <dir>/manifest.json
//   <dir>/samples/<id>.values   float32 LE, [T][C][H][W]
//   <dir>/samples/<id>.labels   uint8, [H][W]
//   <dir>/samples/<id>.valid    uint8, [T][H][W]  (only when some step is invalid)

std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& directory);
Dataset load_dataset(const std::filesystem::path& directory);

// ---------------------------------------------------------------------------
// Normalization

inline constexpr double kStdEpsilon = 1e-6;

/// Pooled population mean/std per channel over all valid pixels.
ChannelStats compute_channel_stats(const Dataset& dataset);

/// z-scores every channel; stats are computed from this dataset (which should
/// be the train split) and recorded in channel_stats.
Dataset normalize_channels(const Dataset& dataset);

/// Applies previously computed statistics verbatim (used for the test split).
Dataset apply_channel_stats(const Dataset& dataset, const ChannelStats& stats);

/// Seeded shuffle then split: the first round(train_fraction * n) samples
/// become the train split.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction,
                                          uint64_t seed);

}  // namespace frp

#endif  // FRP_SITS_DATA_HPP_
