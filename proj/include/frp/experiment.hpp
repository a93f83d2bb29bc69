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

#ifndef FRP_EXPERIMENT_HPP_
#define FRP_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "frp/report.hpp"
#include "frp/sits_data.hpp"
#include "frp/training.hpp"
#include "json.hpp"

namespace frp {

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

struct MethodEntry {
  std::string label;
  Method method = Method::kBaseline;
  /// TrainConfig keys merged over the plan's base "train" object.
  nlohmann::json overrides = nlohmann::json::object();
};

// Plan file (JSON, "schema": 1):
//   name, output_dir, dataset {"synthetic": {...}} | {"path": "<dir>"},
//   split {train_fraction, seed}, validation_fraction, backbones [...],
//   seeds [...], train {...}, teacher {...}, methods [{name, method, ...}],
//   evaluation {gap_modes [...], ratios [...], seed}
struct ExperimentPlan {
  std::string name = "experiment";
  std::filesystem::path output_dir = "results";
  nlohmann::json dataset;
  double train_fraction = 0.6;
  uint64_t split_seed = 7;
  /// Share of the train split held out for early stopping; 0 disables it.
  double validation_fraction = 0.0;
  std::vector<nlohmann::json> backbones;
  std::vector<uint64_t> seeds = {0, 1, 2};
  nlohmann::json train = nlohmann::json::object();
  nlohmann::json teacher = nlohmann::json::object();
  std::vector<MethodEntry> methods;
  std::vector<std::string> gap_modes = {"random"};
  std::vector<double> ratios = {0.0, 0.25, 0.5, 0.75};
  uint64_t eval_seed = kDefaultEvalSeed;
};

/// Throws ValidationError with a field path.
ExperimentPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentPlan& plan);
ExperimentPlan load_plan(const std::filesystem::path& path);

/// Parses JSON text, reporting syntax errors with line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);

struct Diagnostics {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
};

/// Accepts an experiment plan (has "methods") or a training config.
Diagnostics validate_config(const std::filesystem::path& path);

struct PreparedData {
  Dataset train;
  Dataset validation;  // empty unless validation_fraction > 0
  Dataset test;
};

/// Loads or generates the dataset, splits it with the plan's seed and
/// z-scores channels with train statistics.
PreparedData prepare_data(const ExperimentPlan& plan);

/// Base train config, then method overrides, then method, seed and the
/// backbone completed with the dataset's channel and class counts.
TrainConfig resolve_config(const ExperimentPlan& plan, const MethodEntry& entry, const nlohmann::json& backbone,
                           uint64_t seed, int channels, int classes);
/// Config used to pretrain the teacher of a student run.
TrainConfig resolve_teacher_config(const ExperimentPlan& plan, const nlohmann::json& backbone, uint64_t seed,
                                   int channels, int classes);

/// FRP_RESULTS_DIR/<plan name> when the variable is set, else output_dir.
std::filesystem::path results_directory(const ExperimentPlan& plan);

struct RunOptions {
  std::ostream* progress = nullptr;
};

struct ExperimentResult {
  std::filesystem::path output_dir;
  std::vector<ResultRow> rows;
  std::vector<std::filesystem::path> files;
  int models_trained = 0;
  int models_reused = 0;
};

/// Runs every stage, reusing finished checkpoints and cached evaluations
/// under the results directory.  On failure status.json records the stage
/// and the error before the exception propagates.
ExperimentResult run_experiment(const ExperimentPlan& plan, const RunOptions& options = {});
ExperimentResult run_experiment(const std::filesystem::path& plan_path, const RunOptions& options = {});

}  // namespace frp

#endif  // FRP_EXPERIMENT_HPP_
