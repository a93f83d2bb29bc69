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

#include "frp/losses.hpp"

#include <algorithm>
#include <cmath>

#include "frp/common.hpp"

namespace frp {

void LossWeights::validate() const {
  if (!(sigma >= 0.0) || !(gamma >= 0.0) || !(lambda >= 0.0)) {
    throw ValidationError("loss weights must be nonnegative");
  }
  if (sigma == 0.0 && gamma == 0.0 && lambda == 0.0) {
    throw ValidationError("loss weights sigma, gamma and lambda are all zero");
  }
}

void DistillConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ValidationError("distillation temperature must be positive");
  }
}

std::string to_string(KdTarget target) { return target == KdTarget::kTeacher ? "teacher" : "student"; }

KdTarget kd_target_from_string(const std::string& name) {
  if (name == "teacher") return KdTarget::kTeacher;
  if (name == "student") return KdTarget::kStudent;
  throw ValidationError("kd_target must be \"teacher\" or \"student\", got '" + name + "'");
}

nlohmann::json to_json(const LossBreakdown& b) {
  return {{"l_fr", b.l_fr}, {"l_kd", b.l_kd}, {"l_ce", b.l_ce}, {"total", b.total}};
}

Standardized standardize(std::span<const double> feature, int C, int H, int W) {
  const size_t P = static_cast<size_t>(H) * W;
  if (C < 1 || P == 0 || feature.size() != C * P) throw ValidationError("standardize: shape mismatch");
  Standardized s{C, H, W, std::vector<double>(feature.size()), std::vector<double>(C), std::vector<double>(C)};
  for (int c = 0; c < C; ++c) {
    const double* f = feature.data() + c * P;
    double mean = 0.0;
    for (size_t p = 0; p < P; ++p) mean += f[p];
    mean /= P;
    double var = 0.0;
    for (size_t p = 0; p < P; ++p) var += (f[p] - mean) * (f[p] - mean);
    const double sd = std::sqrt(var / P);
    s.mean[c] = mean;
    s.std[c] = sd;
    const double denom = sd + kStandardizeEpsilon;
    for (size_t p = 0; p < P; ++p) s.z[c * P + p] = (f[p] - mean) / denom;
  }
  return s;
}

std::vector<double> standardize_backward(const Standardized& s, std::span<const double> feature,
                                         std::span<const double> grad_z) {
  const size_t P = static_cast<size_t>(s.H) * s.W;
  if (feature.size() != s.C * P || grad_z.size() != s.C * P) {
    throw ValidationError("standardize_backward: shape mismatch");
  }
  std::vector<double> out(feature.size());
  for (int c = 0; c < s.C; ++c) {
    const double* f = feature.data() + c * P;
    const double* g = grad_z.data() + c * P;
    const double denom = s.std[c] + kStandardizeEpsilon;
    double g_mean = 0.0, g_dev = 0.0;
    for (size_t p = 0; p < P; ++p) {
      g_mean += g[p];
      g_dev += g[p] * (f[p] - s.mean[c]);
    }
    g_mean /= P;
    // d std / d f_j = (f_j - mean) / (P std); zero for a constant channel.
    const double k = s.std[c] > 0.0 ? g_dev / (P * s.std[c] * denom * denom) : 0.0;
    for (size_t p = 0; p < P; ++p) out[c * P + p] = (g[p] - g_mean) / denom - k * (f[p] - s.mean[c]);
  }
  return out;
}

double feature_reconstruction_loss(std::span<const double> z_teacher, std::span<const double> z_student) {
  if (z_teacher.size() != z_student.size() || z_teacher.empty()) {
    throw ValidationError("feature_reconstruction_loss: teacher and student features differ in shape (" +
                          std::to_string(z_teacher.size()) + " vs " + std::to_string(z_student.size()) + ")");
  }
  double acc = 0.0;
  for (size_t i = 0; i < z_teacher.size(); ++i) {
    const double d = z_student[i] - z_teacher[i];
    acc += d * d;
  }
  return acc / z_teacher.size();
}

double feature_reconstruction_loss(const std::vector<std::vector<double>>& z_teacher,
                                   const std::vector<std::vector<double>>& z_student) {
  if (z_teacher.size() != z_student.size() || z_teacher.empty()) {
    throw ValidationError("feature_reconstruction_loss: batch sizes differ");
  }
  double acc = 0.0;
  for (size_t b = 0; b < z_teacher.size(); ++b) acc += feature_reconstruction_loss(z_teacher[b], z_student[b]);
  return acc / z_teacher.size();
}

std::vector<double> feature_reconstruction_grad(std::span<const double> z_teacher,
                                                std::span<const double> z_student) {
  if (z_teacher.size() != z_student.size() || z_teacher.empty()) {
    throw ValidationError("feature_reconstruction_grad: shape mismatch");
  }
  std::vector<double> g(z_student.size());
  const double scale = 2.0 / z_student.size();
  for (size_t i = 0; i < g.size(); ++i) g[i] = scale * (z_student[i] - z_teacher[i]);
  return g;
}

namespace {

size_t pixel_count(size_t n, int K, const char* what) {
  if (K < 1 || n == 0 || n % K != 0) throw ValidationError(std::string(what) + ": tensor is not [K][P]");
  return n / K;
}

void check_labels(std::span<const uint8_t> labels, size_t P, int K, std::span<const double> weights) {
  if (labels.size() != P) throw ValidationError("cross_entropy: label map has wrong size");
  for (uint8_t y : labels) {
    if (y >= K) {
      throw ValidationError("cross_entropy: label " + std::to_string(y) + " >= K=" + std::to_string(K));
    }
  }
  if (!weights.empty() && static_cast<int>(weights.size()) != K) {
    throw ValidationError("cross_entropy: class_weights must have K entries");
  }
}

// Softmax of column p of a [K][P] map divided by temperature, in log space.
void log_softmax_column(std::span<const double> logits, int K, size_t P, size_t p, double temperature,
                        std::vector<double>& out) {
  double mx = -INFINITY;
  for (int k = 0; k < K; ++k) mx = std::max(mx, logits[k * P + p] / temperature);
  double sum = 0.0;
  for (int k = 0; k < K; ++k) sum += std::exp(logits[k * P + p] / temperature - mx);
  const double lse = mx + std::log(sum);
  for (int k = 0; k < K; ++k) out[k] = logits[k * P + p] / temperature - lse;
}

}  // namespace

double cross_entropy_loss(std::span<const double> probs, int K, std::span<const uint8_t> labels,
                          std::span<const double> class_weights) {
  const size_t P = pixel_count(probs.size(), K, "cross_entropy_loss");
  check_labels(labels, P, K, class_weights);
  double acc = 0.0, wsum = 0.0;
  for (size_t p = 0; p < P; ++p) {
    const double w = class_weights.empty() ? 1.0 : class_weights[labels[p]];
    acc += -w * std::log(std::max(probs[labels[p] * P + p], 1e-300));
    wsum += w;
  }
  if (!(wsum > 0.0)) throw ValidationError("cross_entropy_loss: class weights sum to zero on this map");
  return acc / wsum;
}

double cross_entropy_from_logits(std::span<const double> logits, int K, std::span<const uint8_t> labels,
                                 std::span<const double> class_weights, std::vector<double>* grad) {
  const size_t P = pixel_count(logits.size(), K, "cross_entropy_from_logits");
  check_labels(labels, P, K, class_weights);
  std::vector<double> ls(K);
  double wsum = 0.0;
  for (size_t p = 0; p < P; ++p) wsum += class_weights.empty() ? 1.0 : class_weights[labels[p]];
  if (!(wsum > 0.0)) throw ValidationError("cross_entropy_from_logits: class weights sum to zero on this map");
  if (grad) grad->assign(logits.size(), 0.0);
  double acc = 0.0;
  for (size_t p = 0; p < P; ++p) {
    const double w = class_weights.empty() ? 1.0 : class_weights[labels[p]];
    log_softmax_column(logits, K, P, p, 1.0, ls);
    acc -= w * ls[labels[p]];
    if (grad) {
      for (int k = 0; k < K; ++k) {
        (*grad)[k * P + p] = w * (std::exp(ls[k]) - (k == labels[p] ? 1.0 : 0.0)) / wsum;
      }
    }
  }
  return acc / wsum;
}

double distillation_loss(std::span<const double> l_teacher, std::span<const double> l_student, int K,
                         const DistillConfig& cfg, std::vector<double>* grad) {
  cfg.validate();
  if (l_teacher.size() != l_student.size()) {
    throw ValidationError("distillation_loss: teacher and student logits differ in shape");
  }
  const size_t P = pixel_count(l_student.size(), K, "distillation_loss");
  const double T = cfg.temperature;
  const double scale = cfg.t2_scaling ? T * T : 1.0;
  std::vector<double> lt(K), lsd(K);
  if (grad) grad->assign(l_student.size(), 0.0);
  double acc = 0.0;
  for (size_t p = 0; p < P; ++p) {
    log_softmax_column(l_teacher, K, P, p, T, lt);
    log_softmax_column(l_student, K, P, p, T, lsd);
    double kl = 0.0;
    if (cfg.target == KdTarget::kTeacher) {
      for (int k = 0; k < K; ++k) kl += std::exp(lt[k]) * (lt[k] - lsd[k]);
    } else {
      for (int k = 0; k < K; ++k) kl += std::exp(lsd[k]) * (lsd[k] - lt[k]);
    }
    kl = std::max(kl, 0.0);
    acc += kl;
    if (grad) {
      for (int k = 0; k < K; ++k) {
        const double ps = std::exp(lsd[k]);
        const double d = cfg.target == KdTarget::kTeacher ? (ps - std::exp(lt[k])) / T
                                                          : ps * (lsd[k] - lt[k] - kl) / T;
        (*grad)[k * P + p] = scale * d / P;
      }
    }
  }
  return scale * acc / P;
}

LossBreakdown total_loss(double l_fr, double l_kd, double l_ce, const LossWeights& w) {
  LossBreakdown b{l_fr, l_kd, l_ce, 0.0};
  b.total = w.sigma * l_fr + w.gamma * l_kd + w.lambda * l_ce;
  return b;
}

ObjectiveResult objective(std::span<const double> student_fused, std::span<const double> teacher_fused, int C,
                          int H, int W, std::span<const double> student_logits,
                          std::span<const double> teacher_logits, int K, std::span<const uint8_t> labels,
                          const ObjectiveTerms& terms, const LossWeights& weights, const DistillConfig& distill,
                          std::span<const double> class_weights) {
  ObjectiveResult r;
  double l_fr = 0.0, l_kd = 0.0;
  std::vector<double> g_ce;
  const double l_ce = cross_entropy_from_logits(student_logits, K, labels, class_weights, &g_ce);
  r.grad_logits.assign(student_logits.size(), 0.0);
  for (size_t i = 0; i < g_ce.size(); ++i) r.grad_logits[i] = weights.lambda * g_ce[i];

  if (terms.feature_reconstruction) {
    if (student_fused.size() != teacher_fused.size()) {
      throw ValidationError("objective: teacher fused feature has " + std::to_string(teacher_fused.size()) +
                            " values, student " + std::to_string(student_fused.size()));
    }
    if (terms.standardize_features) {
      const Standardized zs = standardize(student_fused, C, H, W);
      const Standardized zt = standardize(teacher_fused, C, H, W);
      l_fr = feature_reconstruction_loss(zt.z, zs.z);
      auto gz = feature_reconstruction_grad(zt.z, zs.z);
      for (auto& v : gz) v *= weights.sigma;
      r.grad_fused = standardize_backward(zs, student_fused, gz);
    } else {
      if (static_cast<size_t>(C) * H * W != student_fused.size()) {
        throw ValidationError("objective: fused feature shape mismatch");
      }
      l_fr = feature_reconstruction_loss(teacher_fused, student_fused);
      r.grad_fused = feature_reconstruction_grad(teacher_fused, student_fused);
      for (auto& v : r.grad_fused) v *= weights.sigma;
    }
  }
  if (terms.distillation) {
    std::vector<double> g_kd;
    l_kd = distillation_loss(teacher_logits, student_logits, K, distill, &g_kd);
    for (size_t i = 0; i < g_kd.size(); ++i) r.grad_logits[i] += weights.gamma * g_kd[i];
  }
  r.parts = total_loss(l_fr, l_kd, l_ce, weights);
  return r;
}

}  // namespace frp
