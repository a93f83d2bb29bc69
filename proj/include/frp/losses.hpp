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

#ifndef FRP_LOSSES_HPP_
#define FRP_LOSSES_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace frp {

/// Weights of the combined objective: sigma on feature reconstruction,
/// gamma on distillation, lambda on cross-entropy.
struct LossWeights {
  double sigma = 1.0;
  double gamma = 1.0;
  double lambda = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

enum class KdTarget { kTeacher, kStudent };

/// KL(target || other) on temperature-softened logits.  With kTeacher the
/// teacher distribution is the target.
struct DistillConfig {
  double temperature = 2.0;
  KdTarget target = KdTarget::kTeacher;
  bool t2_scaling = true;

  void validate() const;
  bool operator==(const DistillConfig&) const = default;
};

std::string to_string(KdTarget target);
KdTarget kd_target_from_string(const std::string& name);

struct LossBreakdown {
  double l_fr = 0.0;
  double l_kd = 0.0;
  double l_ce = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

nlohmann::json to_json(const LossBreakdown& b);

inline constexpr double kStandardizeEpsilon = 1e-6;

/// Per-channel z-scores of a [C][H][W] map over its spatial positions,
/// population std, epsilon added to the std.
struct Standardized {
  int C = 0;
  int H = 0;
  int W = 0;
  std::vector<double> z;
  std::vector<double> mean;
  std::vector<double> std;
};

Standardized standardize(std::span<const double> feature, int C, int H, int W);

/// Gradient with respect to the input feature given dLoss/dz.
std::vector<double> standardize_backward(const Standardized& s, std::span<const double> feature,
                                         std::span<const double> grad_z);

/// Mean squared elementwise difference of one sample.
double feature_reconstruction_loss(std::span<const double> z_teacher, std::span<const double> z_student);
/// Mean over the batch of the per-sample losses.
double feature_reconstruction_loss(const std::vector<std::vector<double>>& z_teacher,
                                   const std::vector<std::vector<double>>& z_student);
/// dLoss/dz_student for one sample.
std::vector<double> feature_reconstruction_grad(std::span<const double> z_teacher,
                                                std::span<const double> z_student);

/// Mean over pixels of -log probs[label]; with class weights the mean is
/// weighted: sum w_y * l / sum w_y.  probs is [K][P].
double cross_entropy_loss(std::span<const double> probs, int K, std::span<const uint8_t> labels,
                          std::span<const double> class_weights = {});

/// Same loss computed from logits with log-softmax, and its logit gradient.
double cross_entropy_from_logits(std::span<const double> logits, int K, std::span<const uint8_t> labels,
                                 std::span<const double> class_weights = {}, std::vector<double>* grad = nullptr);

/// Pixel-averaged KL between softened distributions, times T^2 when
/// t2_scaling is set.  Logit maps are [K][P].  grad (optional) receives
/// dLoss/dl_student.
double distillation_loss(std::span<const double> l_teacher, std::span<const double> l_student, int K,
                         const DistillConfig& cfg, std::vector<double>* grad = nullptr);

LossBreakdown total_loss(double l_fr, double l_kd, double l_ce, const LossWeights& w);

/// One sample's contribution to the combined objective.
struct ObjectiveTerms {
  bool feature_reconstruction = true;
  bool standardize_features = true;
  bool distillation = true;
};

struct ObjectiveResult {
  LossBreakdown parts;
  std::vector<double> grad_fused;   // empty when FR is off
  std::vector<double> grad_logits;
};

/// Evaluates the weighted objective for one student/teacher pair and its
/// gradients with respect to the student's fused feature [C][H][W] and
/// logits [K][P].  Teacher tensors may be empty when neither FR nor KD is on.
ObjectiveResult objective(std::span<const double> student_fused, std::span<const double> teacher_fused, int C,
                          int H, int W, std::span<const double> student_logits,
                          std::span<const double> teacher_logits, int K, std::span<const uint8_t> labels,
                          const ObjectiveTerms& terms, const LossWeights& weights, const DistillConfig& distill,
                          std::span<const double> class_weights = {});

}  // namespace frp

#endif  // FRP_LOSSES_HPP_
