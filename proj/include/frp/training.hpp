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

#ifndef FRP_TRAINING_HPP_
#define FRP_TRAINING_HPP_

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frp/backbones.hpp"
#include "frp/gap_simulation.hpp"
#include "frp/losses.hpp"
#include "frp/sits_data.hpp"
#include "json.hpp"

namespace frp {

/// Raised when the loss turns non-finite.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { kBaseline, kOurs, kDaTd, kDaWs, kLinearIn, kClosestIn, kLastIn };

std::string to_string(Method method);
Method method_from_string(const std::string& name);
/// linear_in / closest_in / last_in: a baseline-trained model evaluated on
/// imputed inputs.
bool is_imputation_method(Method method);

struct Modules {
  bool MA = true;  // temporal masking of the student input
  bool KD = true;  // logit distillation
  bool FR = true;  // fused feature reconstruction
  bool FS = true;  // standardize features before FR

  bool operator==(const Modules&) const = default;
};

struct OptimizerConfig {
  std::string name = "adamw";
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const OptimizerConfig&) const = default;
};

enum class StudentInit { kTeacher, kRandom };

struct TrainConfig {
  int epochs = 30;
  int batch_size = 4;
  OptimizerConfig optimizer;
  MaskConfig mask;
  Modules modules;
  LossWeights loss;
  DistillConfig distill;
  uint64_t seed = 0;
  Method method = Method::kBaseline;
  /// Augmentation probability of the DA baselines.
  double p_augment = 0.5;
  /// Early stopping patience in epochs; only used when a validation
  /// callback is supplied.
  int patience = 10;
  /// Student starts from the teacher's weights or from build_backbone(seed).
  StudentInit student_init = StudentInit::kTeacher;
  std::vector<double> class_weights;
  BackboneConfig backbone;

  /// Throws ValidationError naming the offending field path.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys and wrong types are
/// rejected with the full field path.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct AdamState {
  uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  bool operator==(const AdamState&) const = default;
};

/// Decoupled weight decay then the Adam update.  grads are consumed as is.
void adamw_step(Model& model, const Gradients& grads, const OptimizerConfig& opt, AdamState& state);

struct EpochSummary {
  int epoch = 0;
  LossBreakdown mean_loss;
  std::optional<double> validation_score;

  bool operator==(const EpochSummary&) const = default;
};

struct Checkpoint {
  static constexpr int kVersion = 1;

  Model model;
  TrainConfig config;
  int epoch = 0;  // completed epochs
  std::string shuffle_rng;
  std::string augment_rng;
  AdamState optimizer;
  ChannelStats channel_stats;
  std::vector<EpochSummary> history;
  std::optional<Model> best_model;
  double best_score = -1.0;
  int epochs_since_best = 0;
  bool finished = false;
};

// Layout: <dir>/checkpoint.json, <dir>/optimizer.bin (float64 m then v),
// <dir>/model/ and optionally <dir>/best/ (see save_model).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& directory);
Checkpoint load_checkpoint(const std::filesystem::path& directory);
/// Rejects a checkpoint whose architecture differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& directory, const BackboneConfig& expected);

struct TrainOptions {
  /// JSON-lines sink, one object per optimizer step.
  std::ostream* log = nullptr;
  /// Higher is better; enables early stopping and best-model selection.
  std::function<double(const Model&)> validation_score;
  /// When set a checkpoint is written after every epoch and an existing one
  /// with the same config is resumed.
  std::filesystem::path checkpoint_dir;
  /// Stops (with a checkpoint) after this many epochs of the current call.
  std::optional<int> max_epochs_this_call;
};

struct TrainResult {
  Model model;
  std::vector<EpochSummary> history;
  bool finished = false;
  bool early_stopped = false;
};

/// CE-only training on complete sequences.
TrainResult pretrain_teacher(const Dataset& train, const TrainConfig& cfg, const TrainOptions& options = {});

/// Student training guided by a frozen teacher.  Throws if the teacher is
/// modified or its architecture differs.
TrainResult train_student(const Model& teacher, const Dataset& train, const TrainConfig& cfg,
                          const TrainOptions& options = {});

/// CE-only training with temporal dropout (da_td) or window slicing (da_ws)
/// applied with probability cfg.p_augment.
TrainResult train_da_baseline(const Dataset& train, const TrainConfig& cfg, const TrainOptions& options = {});

/// Mean CE of a model on complete sequences.
double mean_cross_entropy(const Model& model, const Dataset& data);

}  // namespace frp

#endif  // FRP_TRAINING_HPP_
