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

#ifndef FRP_EVALUATION_HPP_
#define FRP_EVALUATION_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frp/backbones.hpp"
#include "frp/interpolation.hpp"
#include "frp/sits_data.hpp"

namespace frp {

/// counts[i * K + j] = pixels with reference i predicted as j.
struct ConfusionMatrix {
  int K = 0;
  std::vector<int64_t> counts;

  explicit ConfusionMatrix(int k = 0) : K(k), counts(static_cast<size_t>(k) * k, 0) {}
  int64_t at(int ref, int pred) const { return counts[static_cast<size_t>(ref) * K + pred]; }
  int64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_matrix(std::span<const uint8_t> pred, std::span<const uint8_t> ref, int K);
ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& ref);

struct MetricsReport {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  double miou = 0.0;
  double mean_f1 = 0.0;
  std::vector<double> per_class_f1;
  /// False for classes absent from both reference and prediction; those
  /// are left out of mean F1 and mIoU.
  std::vector<bool> class_evaluated;
  std::string fingerprint;

  bool operator==(const MetricsReport&) const = default;
};

/// OA = trace / total; AA = mean recall over classes present in the
/// reference; F1 = 2PR / (P + R), 0 when P + R = 0; mIoU = mean
/// TP / (TP + FP + FN); kappa = (p_o - p_e) / (1 - p_e), 1 when p_e = 1.
MetricsReport metrics_from_cm(const ConfusionMatrix& cm);

enum class GapMode { kNone, kRandom, kWindow, kAvailability };

std::string to_string(GapMode mode);
GapMode gap_mode_from_string(const std::string& name);

inline constexpr uint64_t kDefaultEvalSeed = 0xE7A1u;

struct GapSpec {
  GapMode mode = GapMode::kNone;
  std::vector<double> ratios = {0.0};
  /// Independent of any training seed so every method sees the same views.
  uint64_t seed = kDefaultEvalSeed;

  void validate() const;
};

struct RatioReport {
  double ratio = 0.0;
  MetricsReport metrics;
  ConfusionMatrix cm;
};

/// Test view of one sample under a gap mode.  random: temporal_mask with
/// r = ratio; window: window_mask; availability: a seasonal month pattern
/// whose expected missing rate is ratio.  The draw depends only on the
/// seed, the ratio and the sample id.  With an imputer the gaps are filled
/// back to the full date grid.
SITSample gapped_view(const SITSample& sample, GapMode mode, double ratio, uint64_t seed,
                      std::optional<ImputeMethod> imputer = std::nullopt);

/// One pooled confusion matrix per ratio.
std::vector<RatioReport> evaluate(const Model& model, const Dataset& test, const GapSpec& gap,
                                  std::optional<ImputeMethod> imputer = std::nullopt);

}  // namespace frp

#endif  // FRP_EVALUATION_HPP_
