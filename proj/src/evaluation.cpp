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

#include "frp/evaluation.hpp"

#include <cmath>

#include "frp/gap_simulation.hpp"

namespace frp {

int64_t ConfusionMatrix::total() const {
  int64_t n = 0;
  for (int64_t c : counts) n += c;
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.K != K) throw ValidationError("confusion matrices differ in K");
  for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

ConfusionMatrix confusion_matrix(std::span<const uint8_t> pred, std::span<const uint8_t> ref, int K) {
  if (K < 1) throw ValidationError("confusion_matrix: K must be positive");
  if (pred.size() != ref.size()) {
    throw ValidationError("confusion_matrix: prediction has " + std::to_string(pred.size()) +
                          " pixels, reference " + std::to_string(ref.size()));
  }
  ConfusionMatrix cm(K);
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= K || ref[i] >= K) throw ValidationError("confusion_matrix: class index >= K");
    cm.counts[static_cast<size_t>(ref[i]) * K + pred[i]] += 1;
  }
  return cm;
}

ConfusionMatrix confusion_matrix(const LabelMap& pred, const LabelMap& ref) {
  if (pred.H != ref.H || pred.W != ref.W) throw ValidationError("confusion_matrix: label maps differ in shape");
  if (pred.K != ref.K) throw ValidationError("confusion_matrix: label maps differ in K");
  return confusion_matrix(pred.classes, ref.classes, ref.K);
}

MetricsReport metrics_from_cm(const ConfusionMatrix& cm) {
  const int K = cm.K;
  const double N = static_cast<double>(cm.total());
  if (N <= 0) throw ValidationError("metrics_from_cm: confusion matrix is empty");
  std::vector<double> row(K, 0.0), col(K, 0.0);
  double trace = 0.0;
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      row[i] += cm.at(i, j);
      col[j] += cm.at(i, j);
    }
    trace += cm.at(i, i);
  }
  MetricsReport r;
  r.oa = trace / N;
  r.per_class_f1.assign(K, 0.0);
  r.class_evaluated.assign(K, false);
  double recall_sum = 0.0, f1_sum = 0.0, iou_sum = 0.0, pe = 0.0;
  int ref_classes = 0, evaluated = 0;
  for (int k = 0; k < K; ++k) {
    const double tp = cm.at(k, k);
    const double fn = row[k] - tp;
    const double fp = col[k] - tp;
    pe += (row[k] / N) * (col[k] / N);
    if (row[k] > 0) {
      recall_sum += tp / row[k];
      ++ref_classes;
    }
    if (tp + fp + fn == 0) continue;
    r.class_evaluated[k] = true;
    ++evaluated;
    const double precision = col[k] > 0 ? tp / col[k] : 0.0;
    const double recall = row[k] > 0 ? tp / row[k] : 0.0;
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    r.per_class_f1[k] = f1;
    f1_sum += f1;
    iou_sum += tp / (tp + fp + fn);
  }
  r.aa = recall_sum / ref_classes;
  r.mean_f1 = f1_sum / evaluated;
  r.miou = iou_sum / evaluated;
  r.kappa = pe >= 1.0 ? 1.0 : (r.oa - pe) / (1.0 - pe);
  return r;
}

std::string to_string(GapMode mode) {
  switch (mode) {
    case GapMode::kNone: return "none";
    case GapMode::kRandom: return "random";
    case GapMode::kWindow: return "window";
    case GapMode::kAvailability: return "availability";
  }
  return "?";
}

GapMode gap_mode_from_string(const std::string& name) {
  if (name == "none") return GapMode::kNone;
  if (name == "random") return GapMode::kRandom;
  if (name == "window") return GapMode::kWindow;
  if (name == "availability") return GapMode::kAvailability;
  throw ValidationError("unknown gap mode '" + name + "' (expected none, random, window or availability)");
}

void GapSpec::validate() const {
  if (ratios.empty()) throw ValidationError("gap.ratios: must not be empty");
  for (double r : ratios) {
    if (!(r >= 0.0 && r < 1.0)) throw ValidationError("gap.ratios: every ratio must lie in [0, 1)");
  }
}

namespace {

uint64_t id_hash(const std::string& id) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

SITSample gapped_view(const SITSample& sample, GapMode mode, double ratio, uint64_t seed,
                      std::optional<ImputeMethod> imputer) {
  if (mode == GapMode::kNone) return sample;
  Rng rng(mix_seed(mix_seed(seed, static_cast<uint64_t>(std::llround(ratio * 1e6))), id_hash(sample.id)));
  GapResult g;
  switch (mode) {
    case GapMode::kRandom: g = temporal_mask(sample, ratio, rng); break;
    case GapMode::kWindow: g = window_mask(sample, ratio, rng); break;
    case GapMode::kAvailability:
      g = apply_availability_pattern(sample, sample_availability(seasonal_keep_profile(ratio), rng));
      break;
    case GapMode::kNone: break;
  }
  if (!imputer || g.sample.T == sample.T) return std::move(g.sample);
  return impute(g.sample, g.pattern, sample.dates, *imputer);
}

std::vector<RatioReport> evaluate(const Model& model, const Dataset& test, const GapSpec& gap,
                                  std::optional<ImputeMethod> imputer) {
  gap.validate();
  test.validate();
  if (test.samples.empty()) throw ValidationError("evaluate: test split is empty");
  if (test.channels() != model.config.in_channels) {
    throw ValidationError("evaluate: dataset has " + std::to_string(test.channels()) +
                          " channels, model expects " + std::to_string(model.config.in_channels));
  }
  if (test.num_classes() != model.config.num_classes) {
    throw ValidationError("evaluate: dataset has " + std::to_string(test.num_classes()) +
                          " classes, model predicts " + std::to_string(model.config.num_classes));
  }
  const Network net(model);
  std::vector<RatioReport> out;
  const std::vector<double> ratios = gap.mode == GapMode::kNone ? std::vector<double>{0.0} : gap.ratios;
  for (double ratio : ratios) {
    ConfusionMatrix cm(model.config.num_classes);
    for (const auto& s : test.samples) {
      const SITSample view = gapped_view(s.sits, gap.mode, ratio, gap.seed, imputer);
      const auto pred = net.forward(view).predict();
      cm += confusion_matrix(pred, s.labels.classes, cm.K);
    }
    out.push_back({ratio, metrics_from_cm(cm), cm});
  }
  return out;
}

}  // namespace frp
