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

#ifndef FRP_BACKBONES_HPP_
#define FRP_BACKBONES_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "frp/sits_data.hpp"
#include "json.hpp"

namespace frp {

enum class BackboneKind { kTinyTae, kTinyRnn };

std::string to_string(BackboneKind kind);
BackboneKind backbone_kind_from_string(const std::string& name);

// tiny_tae: per-frame encoder at full, 1/2 and 1/4 resolution; a
// lightweight temporal attention (one learned query per head, keys built
// from the deepest features plus a day-of-year encoding) collapses time at
// 1/4 resolution; skip features are pooled with the same attention weights
// and a small decoder maps back to full resolution.
//
// tiny_rnn: per-frame pointwise encoder followed by a convolutional GRU at
// full resolution; the last hidden state is the fused feature.
struct BackboneConfig {
  BackboneKind kind = BackboneKind::kTinyTae;
  int in_channels = 4;
  int num_classes = 4;
  std::vector<int> widths = {8, 16, 16};  // tiny_tae encoder levels; widths[0] also used by tiny_rnn
  int decoder_width = 16;
  int heads = 2;
  int key_dim = 8;
  int hidden = 16;      // tiny_rnn hidden channels
  int rnn_kernel = 3;   // tiny_rnn hidden-to-hidden kernel (odd)

  void validate() const;
  int fused_channels() const;
  /// Spatial size of the fused feature for an H x W input.
  std::pair<int, int> fused_size(int H, int W) const;

  bool operator==(const BackboneConfig&) const = default;
};

nlohmann::json to_json(const BackboneConfig& cfg);
BackboneConfig backbone_config_from_json(const nlohmann::json& j);

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;

  bool operator==(const ParamTensor&) const = default;
};

struct Model {
  BackboneConfig config;
  uint64_t seed = 0;
  std::vector<ParamTensor> params;

  ParamTensor& param(const std::string& name);
  const ParamTensor& param(const std::string& name) const;
  size_t num_parameters() const;

  bool operator==(const Model&) const = default;
};

/// Deterministic initialization for a fixed seed.
Model build_backbone(const BackboneConfig& cfg, uint64_t seed);

/// Day-of-year sinusoidal encoding with period 366: component 2j is
/// sin(2 pi (j + 1) d / 366), component 2j + 1 the matching cosine.
std::vector<double> day_of_year_encoding(int day, int dims);

struct ModelOutputs {
  int feature_channels = 0;
  int feature_height = 0;
  int feature_width = 0;
  std::vector<double> fused_feature;  // [C_f][H_f][W_f]
  int num_classes = 0;
  int height = 0;
  int width = 0;
  std::vector<double> logits;  // [K][H][W]
  std::vector<double> probs;   // softmax over K
  /// tiny_tae only: [heads][T][H_f][W_f] temporal attention weights.
  std::vector<double> attention;

  /// Argmax per pixel, ties resolved to the lowest class index.
  std::vector<uint8_t> predict() const;
};

enum class Precision { kFloat, kDouble };

/// Per-parameter gradient buffers, same order and sizes as Model::params.
using Gradients = std::vector<std::vector<double>>;
Gradients zero_gradients(const Model& model);

/// Activations recorded by a forward pass for the matching backward pass.
class Trace {
 public:
  Trace();
  ~Trace();
  Trace(Trace&&) noexcept;
  Trace& operator=(Trace&&) noexcept;

  struct Impl;
  std::unique_ptr<Impl> impl;
};

/// A read-only snapshot of a model's weights in the chosen precision.
/// Forward passes never mutate it and may run concurrently.
class Network {
 public:
  explicit Network(const Model& model, Precision precision = Precision::kFloat);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const BackboneConfig& config() const;

  /// Runs the model on one (possibly shortened) sequence.  When trace is
  /// non-null it receives what backward() needs.
  ModelOutputs forward(const SITSample& sample, Trace* trace = nullptr) const;

  /// Accumulates dLoss/dparams into grads given the loss gradients with
  /// respect to the fused feature and the logits.
  void backward(const Trace& trace, std::span<const double> grad_fused,
                std::span<const double> grad_logits, Gradients& grads) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Convenience single-shot forward in float precision.
ModelOutputs forward(const Model& model, const SITSample& sample);

// Checkpoint format: <dir>/model.json (config, seed, parameter names and
// shapes) and <dir>/params.bin (float32 LE, parameters concatenated in
// manifest order).
void save_model(const Model& model, const std::filesystem::path& directory);
Model load_model(const std::filesystem::path& directory);
/// As load_model but rejects a checkpoint whose config differs from `expected`.
Model load_model(const std::filesystem::path& directory, const BackboneConfig& expected);

}  // namespace frp

#endif  // FRP_BACKBONES_HPP_
