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

#include "frp/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "frp/common.hpp"
#include "json_fields.hpp"

namespace frp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<Method, const char*>> kMethodNames = {
    {Method::kBaseline, "baseline"},   {Method::kOurs, "ours"},         {Method::kDaTd, "da_td"},
    {Method::kDaWs, "da_ws"},          {Method::kLinearIn, "linear_in"}, {Method::kClosestIn, "closest_in"},
    {Method::kLastIn, "last_in"}};

}  // namespace

std::string to_string(Method method) {
  for (const auto& [m, name] : kMethodNames)
    if (m == method) return name;
  return "?";
}

Method method_from_string(const std::string& name) {
  for (const auto& [m, n] : kMethodNames)
    if (name == n) return m;
  throw ValidationError("method: unknown method '" + name +
                        "' (expected baseline, ours, da_td, da_ws, linear_in, closest_in or last_in)");
}

bool is_imputation_method(Method method) {
  return method == Method::kLinearIn || method == Method::kClosestIn || method == Method::kLastIn;
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (epochs < 1) fail("epochs: must be >= 1");
  if (batch_size < 1) fail("batch_size: must be >= 1");
  if (optimizer.name != "adamw") fail("optimizer.name: only \"adamw\" is supported");
  if (!(optimizer.lr > 0.0) || !std::isfinite(optimizer.lr)) fail("optimizer.lr: must be > 0");
  if (!(optimizer.weight_decay >= 0.0)) fail("optimizer.weight_decay: must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) fail("optimizer.beta1: must lie in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) fail("optimizer.beta2: must lie in [0, 1)");
  if (!(optimizer.eps > 0.0)) fail("optimizer.eps: must be > 0");
  if (!(mask.M >= 0.0 && mask.M <= 1.0)) fail("mask.M: must lie in [0, 1]");
  if (!(mask.N >= 0.0 && mask.N <= 1.0)) fail("mask.N: must lie in [0, 1]");
  if (mask.M > mask.N) fail("mask.M must not exceed mask.N (ratio r ~ U(M, N))");
  if (!(loss.sigma >= 0.0)) fail("loss.sigma: must be >= 0");
  if (!(loss.gamma >= 0.0)) fail("loss.gamma: must be >= 0");
  if (!(loss.lambda >= 0.0)) fail("loss.lambda: must be >= 0");
  if (loss.sigma == 0.0 && loss.gamma == 0.0 && loss.lambda == 0.0) {
    fail("loss: sigma, gamma and lambda must not all be zero");
  }
  if (!(distill.temperature > 0.0) || !std::isfinite(distill.temperature)) {
    fail("loss.temperature: must be > 0");
  }
  if (!(p_augment >= 0.0 && p_augment <= 1.0)) fail("p_augment: must lie in [0, 1]");
  if (patience < 1) fail("patience: must be >= 1");
  for (size_t i = 0; i < class_weights.size(); ++i) {
    if (!(class_weights[i] >= 0.0)) fail("loss.class_weights[" + std::to_string(i) + "]: must be >= 0");
  }
  if (!class_weights.empty() && static_cast<int>(class_weights.size()) != backbone.num_classes) {
    fail("loss.class_weights: needs one entry per class");
  }
  try {
    backbone.validate();
  } catch (const ValidationError& e) {
    fail(std::string(e.what()));
  }
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"method", to_string(c.method)},
          {"p_augment", c.p_augment},
          {"patience", c.patience},
          {"student_init", c.student_init == StudentInit::kTeacher ? "teacher" : "random"},
          {"optimizer",
           {{"name", c.optimizer.name},
            {"lr", c.optimizer.lr},
            {"weight_decay", c.optimizer.weight_decay},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"eps", c.optimizer.eps}}},
          {"mask", {{"M", c.mask.M}, {"N", c.mask.N}}},
          {"modules", {{"MA", c.modules.MA}, {"KD", c.modules.KD}, {"FR", c.modules.FR}, {"FS", c.modules.FS}}},
          {"loss",
           {{"sigma", c.loss.sigma},
            {"gamma", c.loss.gamma},
            {"lambda", c.loss.lambda},
            {"temperature", c.distill.temperature},
            {"kd_target", to_string(c.distill.target)},
            {"kd_t2_scaling", c.distill.t2_scaling},
            {"class_weights", c.class_weights}}},
          {"backbone", to_json(c.backbone)}};
}


TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  const detail::Fields f(j, "");
  f.allow({"schema", "epochs", "batch_size", "seed", "method", "p_augment", "patience", "student_init", "optimizer",
           "mask", "modules", "loss", "backbone"});
  if (f.has("schema") && f.integer("schema", 1) != 1) throw ValidationError("schema: unsupported version");
  c.epochs = f.integer("epochs", c.epochs);
  c.batch_size = f.integer("batch_size", c.batch_size);
  c.seed = f.unsigned_integer("seed", c.seed);
  c.method = method_from_string(f.string("method", to_string(c.method)));
  c.p_augment = f.number("p_augment", c.p_augment);
  c.patience = f.integer("patience", c.patience);
  const std::string init = f.string("student_init", "teacher");
  if (init == "teacher") {
    c.student_init = StudentInit::kTeacher;
  } else if (init == "random") {
    c.student_init = StudentInit::kRandom;
  } else {
    throw ValidationError("student_init: expected \"teacher\" or \"random\"");
  }
  if (f.has("optimizer")) {
    const detail::Fields o = f.child("optimizer");
    o.allow({"name", "lr", "weight_decay", "beta1", "beta2", "eps"});
    c.optimizer.name = o.string("name", c.optimizer.name);
    c.optimizer.lr = o.number("lr", c.optimizer.lr);
    c.optimizer.weight_decay = o.number("weight_decay", c.optimizer.weight_decay);
    c.optimizer.beta1 = o.number("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.number("beta2", c.optimizer.beta2);
    c.optimizer.eps = o.number("eps", c.optimizer.eps);
  }
  if (f.has("mask")) {
    const detail::Fields m = f.child("mask");
    m.allow({"M", "N"});
    c.mask.M = m.number("M", c.mask.M);
    c.mask.N = m.number("N", c.mask.N);
  }
  if (f.has("modules")) {
    const detail::Fields m = f.child("modules");
    m.allow({"MA", "KD", "FR", "FS"});
    c.modules.MA = m.boolean("MA", c.modules.MA);
    c.modules.KD = m.boolean("KD", c.modules.KD);
    c.modules.FR = m.boolean("FR", c.modules.FR);
    c.modules.FS = m.boolean("FS", c.modules.FS);
  }
  if (f.has("loss")) {
    const detail::Fields l = f.child("loss");
    l.allow({"sigma", "gamma", "lambda", "temperature", "kd_target", "kd_t2_scaling", "class_weights"});
    c.loss.sigma = l.number("sigma", c.loss.sigma);
    c.loss.gamma = l.number("gamma", c.loss.gamma);
    c.loss.lambda = l.number("lambda", c.loss.lambda);
    c.distill.temperature = l.number("temperature", c.distill.temperature);
    const std::string target = l.string("kd_target", to_string(c.distill.target));
    if (target != "teacher" && target != "student") {
      throw ValidationError("loss.kd_target: expected \"teacher\" or \"student\"");
    }
    c.distill.target = kd_target_from_string(target);
    c.distill.t2_scaling = l.boolean("kd_t2_scaling", c.distill.t2_scaling);
    c.class_weights = l.numbers("class_weights");
  }
  if (f.has("backbone")) {
    const detail::Fields b = f.child("backbone");
    b.allow({"kind", "in_channels", "num_classes", "widths", "decoder_width", "heads", "key_dim", "hidden",
             "rnn_kernel"});
    const std::string kind = b.string("kind", to_string(c.backbone.kind));
    if (kind != "tiny_tae" && kind != "tiny_rnn") {
      throw ValidationError("backbone.kind: expected \"tiny_tae\" or \"tiny_rnn\"");
    }
    c.backbone.kind = backbone_kind_from_string(kind);
    c.backbone.in_channels = b.integer("in_channels", c.backbone.in_channels);
    c.backbone.num_classes = b.integer("num_classes", c.backbone.num_classes);
    c.backbone.widths = b.integers("widths", c.backbone.widths);
    c.backbone.decoder_width = b.integer("decoder_width", c.backbone.decoder_width);
    c.backbone.heads = b.integer("heads", c.backbone.heads);
    c.backbone.key_dim = b.integer("key_dim", c.backbone.key_dim);
    c.backbone.hidden = b.integer("hidden", c.backbone.hidden);
    c.backbone.rnn_kernel = b.integer("rnn_kernel", c.backbone.rnn_kernel);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Optimizer

void adamw_step(Model& model, const Gradients& grads, const OptimizerConfig& opt, AdamState& state) {
  if (grads.size() != model.params.size()) throw ValidationError("adamw_step: gradient list mismatch");
  if (state.m.empty()) {
    for (const auto& g : grads) {
      state.m.emplace_back(g.size(), 0.0);
      state.v.emplace_back(g.size(), 0.0);
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - opt.lr * opt.weight_decay;
  for (size_t i = 0; i < grads.size(); ++i) {
    auto& p = model.params[i].values;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t j = 0; j < p.size(); ++j) {
      const double g = grads[i][j];
      m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * g;
      v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * g * g;
      const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + opt.eps);
      p[j] = static_cast<float>(static_cast<double>(p[j]) * decay - opt.lr * update);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json history_to_json(const std::vector<EpochSummary>& history) {
  json out = json::array();
  for (const auto& e : history) {
    json row = {{"epoch", e.epoch}, {"loss", to_json(e.mean_loss)}};
    row["validation_score"] = e.validation_score ? json(*e.validation_score) : json(nullptr);
    out.push_back(row);
  }
  return out;
}

std::vector<EpochSummary> history_from_json(const json& j) {
  std::vector<EpochSummary> out;
  for (const auto& row : j) {
    EpochSummary e;
    e.epoch = row.at("epoch").get<int>();
    const auto& l = row.at("loss");
    e.mean_loss = {l.at("l_fr").get<double>(), l.at("l_kd").get<double>(), l.at("l_ce").get<double>(),
                   l.at("total").get<double>()};
    if (!row.at("validation_score").is_null()) e.validation_score = row.at("validation_score").get<double>();
    out.push_back(e);
  }
  return out;
}

void write_f64_file(const fs::path& path, const std::vector<double>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<double> read_f64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("missing optimizer payload " + path.string());
  const auto size = static_cast<size_t>(in.tellg());
  if (size % sizeof(double) != 0) throw FormatError("corrupt optimizer payload " + path.string());
  std::vector<double> data(size / sizeof(double));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  return data;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& directory) {
  // Written next to the target and swapped in so an interrupted save never
  // leaves a half-written checkpoint behind.
  const fs::path staging = directory.string() + ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) throw IoError("cannot create " + staging.string() + ": " + ec.message());

  save_model(ckpt.model, staging / "model");
  if (ckpt.best_model) save_model(*ckpt.best_model, staging / "best");
  std::vector<double> flat;
  for (const auto& m : ckpt.optimizer.m) flat.insert(flat.end(), m.begin(), m.end());
  for (const auto& v : ckpt.optimizer.v) flat.insert(flat.end(), v.begin(), v.end());
  write_f64_file(staging / "optimizer.bin", flat);
  const json manifest = {{"schema", 1},
                         {"format", "frp-checkpoint"},
                         {"version", Checkpoint::kVersion},
                         {"epoch", ckpt.epoch},
                         {"config", to_json(ckpt.config)},
                         {"shuffle_rng", ckpt.shuffle_rng},
                         {"augment_rng", ckpt.augment_rng},
                         {"adam_step", ckpt.optimizer.step},
                         {"optimizer_values", flat.size()},
                         {"channel_stats", {{"mean", ckpt.channel_stats.mean}, {"std", ckpt.channel_stats.std}}},
                         {"history", history_to_json(ckpt.history)},
                         {"has_best", ckpt.best_model.has_value()},
                         {"best_score", ckpt.best_score},
                         {"epochs_since_best", ckpt.epochs_since_best},
                         {"finished", ckpt.finished}};
  write_text_file(staging / "checkpoint.json", manifest.dump(2) + "\n");
  fs::remove_all(directory, ec);
  fs::rename(staging, directory, ec);
  if (ec) throw IoError("cannot move checkpoint into " + directory.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& directory) {
  const fs::path path = directory / "checkpoint.json";
  if (!fs::exists(path)) throw FormatError("no checkpoint at " + directory.string());
  Checkpoint c;
  try {
    const json j = json::parse(read_text_file(path));
    if (j.at("format").get<std::string>() != "frp-checkpoint") throw FormatError("not a training checkpoint");
    const int version = j.at("version").get<int>();
    if (version != Checkpoint::kVersion) {
      throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(Checkpoint::kVersion) + ")");
    }
    c.config = train_config_from_json(j.at("config"));
    c.epoch = j.at("epoch").get<int>();
    c.shuffle_rng = j.at("shuffle_rng").get<std::string>();
    c.augment_rng = j.at("augment_rng").get<std::string>();
    c.optimizer.step = j.at("adam_step").get<uint64_t>();
    c.channel_stats.mean = j.at("channel_stats").at("mean").get<std::vector<double>>();
    c.channel_stats.std = j.at("channel_stats").at("std").get<std::vector<double>>();
    c.history = history_from_json(j.at("history"));
    c.best_score = j.at("best_score").get<double>();
    c.epochs_since_best = j.at("epochs_since_best").get<int>();
    c.finished = j.at("finished").get<bool>();
    c.model = load_model(directory / "model", c.config.backbone);
    if (j.at("has_best").get<bool>()) c.best_model = load_model(directory / "best", c.config.backbone);

    const auto flat = read_f64_file(directory / "optimizer.bin");
    if (flat.size() != j.at("optimizer_values").get<size_t>()) {
      throw FormatError("optimizer payload holds " + std::to_string(flat.size()) + " values, manifest declares " +
                        std::to_string(j.at("optimizer_values").get<size_t>()));
    }
    if (!flat.empty()) {
      if (flat.size() != 2 * c.model.num_parameters()) throw FormatError("optimizer payload does not match model");
      size_t off = 0;
      for (auto* dst : {&c.optimizer.m, &c.optimizer.v}) {
        for (const auto& p : c.model.params) {
          dst->emplace_back(flat.begin() + off, flat.begin() + off + p.values.size());
          off += p.values.size();
        }
      }
    }
    rng_from_state(c.shuffle_rng);
    rng_from_state(c.augment_rng);
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint manifest " + path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw FormatError("invalid checkpoint " + path.string() + ": " + e.what());
  }
  return c;
}

Checkpoint load_checkpoint(const fs::path& directory, const BackboneConfig& expected) {
  Checkpoint c = load_checkpoint(directory);
  if (!(c.config.backbone == expected)) {
    throw FormatError("checkpoint architecture " + to_json(c.config.backbone).dump() + " differs from expected " +
                      to_json(expected).dump());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

enum class Role { kSupervised, kStudent, kAugmented };

struct TeacherOutputs {
  std::vector<double> fused;
  std::vector<double> logits;
};

void check_compatible(const Dataset& train, const TrainConfig& cfg) {
  train.validate();
  if (train.samples.empty()) throw ValidationError("training split is empty");
  if (train.channels() != cfg.backbone.in_channels) {
    throw ValidationError("dataset has " + std::to_string(train.channels()) + " channels but backbone.in_channels is " +
                          std::to_string(cfg.backbone.in_channels));
  }
  if (train.num_classes() != cfg.backbone.num_classes) {
    throw ValidationError("dataset has " + std::to_string(train.num_classes()) +
                          " classes but backbone.num_classes is " + std::to_string(cfg.backbone.num_classes));
  }
}

std::string diagnose(const LossBreakdown& b, int epoch, int step, const std::string& sample_id) {
  std::ostringstream s;
  s << "non-finite loss at epoch " << epoch << " step " << step << " (sample " << sample_id << "): l_fr=" << b.l_fr
    << " l_kd=" << b.l_kd << " l_ce=" << b.l_ce << " total=" << b.total;
  return s.str();
}

TrainResult run_training(const Dataset& train, const TrainConfig& cfg, const TrainOptions& options, Role role,
                         const Model* teacher) {
  cfg.validate();
  check_compatible(train, cfg);
  if (role != Role::kAugmented && !train.uniform_length()) {
    throw ValidationError("training on complete sequences needs a uniform T across the train split");
  }

  Checkpoint state;
  const fs::path& dir = options.checkpoint_dir;
  if (!dir.empty() && fs::exists(dir / "checkpoint.json")) {
    state = load_checkpoint(dir, cfg.backbone);
    if (to_json(state.config) != to_json(cfg)) {
      throw ValidationError("checkpoint at " + dir.string() + " was written for a different training config");
    }
  } else {
    if (role == Role::kStudent && cfg.student_init == StudentInit::kTeacher) {
      state.model = *teacher;
      state.model.seed = cfg.seed;
    } else {
      state.model = build_backbone(cfg.backbone, cfg.seed);
    }
    state.config = cfg;
    state.shuffle_rng = rng_state(Rng(mix_seed(cfg.seed, 0x5EED0001)));
    state.augment_rng = rng_state(Rng(mix_seed(cfg.seed, 0x5EED0002)));
    state.channel_stats = train.channel_stats;
  }

  TrainResult result;
  auto finish = [&](bool early) {
    result.model = state.best_model ? *state.best_model : state.model;
    result.history = state.history;
    result.finished = state.finished;
    result.early_stopped = early;
    return result;
  };
  if (state.finished) {
    const bool early = state.epoch < cfg.epochs;
    return finish(early);
  }

  // The teacher is frozen, so its outputs on the complete sequences are
  // computed once up front.
  const bool use_fr = role == Role::kStudent && cfg.modules.FR;
  const bool use_kd = role == Role::kStudent && cfg.modules.KD;
  std::vector<TeacherOutputs> cache;
  std::vector<ParamTensor> teacher_snapshot;
  if (role == Role::kStudent) {
    if (!(teacher->config == cfg.backbone)) {
      throw ValidationError("teacher architecture " + to_json(teacher->config).dump() +
                            " differs from the student's " + to_json(cfg.backbone).dump());
    }
    teacher_snapshot = teacher->params;
    if (use_fr || use_kd) {
      const Network tnet(*teacher);
      for (const auto& s : train.samples) {
        auto out = tnet.forward(s.sits);
        cache.push_back({std::move(out.fused_feature), std::move(out.logits)});
      }
    }
  }

  const LossWeights weights = role == Role::kStudent ? cfg.loss : LossWeights{0.0, 0.0, 1.0};
  const ObjectiveTerms terms{use_fr, use_fr && cfg.modules.FS, use_kd};
  Rng shuffle_rng = rng_from_state(state.shuffle_rng);
  Rng augment_rng = rng_from_state(state.augment_rng);
  const size_t n = train.samples.size();
  const int K = cfg.backbone.num_classes;
  int epochs_this_call = 0;
  bool early = false;

  while (state.epoch < cfg.epochs) {
    const int epoch = state.epoch;
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(shuffle_rng, i + 1)]);

    LossBreakdown epoch_sum;
    int steps = 0;
    for (size_t start = 0; start < n; start += cfg.batch_size) {
      const size_t end = std::min(n, start + static_cast<size_t>(cfg.batch_size));
      const double inv_b = 1.0 / static_cast<double>(end - start);
      const Network net(state.model);
      Gradients grads = zero_gradients(state.model);
      LossBreakdown step_loss;
      for (size_t b = start; b < end; ++b) {
        const size_t idx = order[b];
        const LabeledSample& ls = train.samples[idx];
        const SITSample* input = &ls.sits;
        GapResult altered;
        if (role == Role::kStudent && cfg.modules.MA) {
          const double r = sample_mask_ratio(cfg.mask, augment_rng);
          altered = temporal_mask(ls.sits, r, augment_rng);
          input = &altered.sample;
        } else if (role == Role::kAugmented) {
          altered = cfg.method == Method::kDaTd
                        ? temporal_dropout(ls.sits, augment_rng, cfg.mask.M, cfg.mask.N, cfg.p_augment)
                        : window_slice(ls.sits, augment_rng, cfg.mask.M, cfg.mask.N, cfg.p_augment);
          input = &altered.sample;
        }
        Trace trace;
        const ModelOutputs out = net.forward(*input, &trace);
        static const std::vector<double> kNone;
        const auto& t_fused = cache.empty() ? kNone : cache[idx].fused;
        const auto& t_logits = cache.empty() ? kNone : cache[idx].logits;
        ObjectiveResult obj = objective(out.fused_feature, t_fused, out.feature_channels, out.feature_height,
                                        out.feature_width, out.logits, t_logits, K, ls.labels.classes, terms,
                                        weights, cfg.distill, cfg.class_weights);
        if (!std::isfinite(obj.parts.total)) {
          throw TrainingError(diagnose(obj.parts, epoch, steps, ls.sits.id));
        }
        for (auto& g : obj.grad_fused) g *= inv_b;
        for (auto& g : obj.grad_logits) g *= inv_b;
        net.backward(trace, obj.grad_fused, obj.grad_logits, grads);
        step_loss.l_fr += obj.parts.l_fr * inv_b;
        step_loss.l_kd += obj.parts.l_kd * inv_b;
        step_loss.l_ce += obj.parts.l_ce * inv_b;
        step_loss.total += obj.parts.total * inv_b;
      }
      for (const auto& g : grads)
        for (double v : g)
          if (!std::isfinite(v)) throw TrainingError(diagnose(step_loss, epoch, steps, "gradient"));
      adamw_step(state.model, grads, cfg.optimizer, state.optimizer);
      if (options.log) {
        json line = to_json(step_loss);
        line["epoch"] = epoch;
        line["step"] = steps;
        *options.log << line.dump() << "\n";
      }
      epoch_sum.l_fr += step_loss.l_fr;
      epoch_sum.l_kd += step_loss.l_kd;
      epoch_sum.l_ce += step_loss.l_ce;
      epoch_sum.total += step_loss.total;
      ++steps;
    }

    EpochSummary summary;
    summary.epoch = epoch;
    summary.mean_loss = {epoch_sum.l_fr / steps, epoch_sum.l_kd / steps, epoch_sum.l_ce / steps,
                         epoch_sum.total / steps};
    if (options.validation_score) {
      const double score = options.validation_score(state.model);
      summary.validation_score = score;
      if (!state.best_model || score > state.best_score) {
        state.best_score = score;
        state.best_model = state.model;
        state.epochs_since_best = 0;
      } else {
        state.epochs_since_best += 1;
      }
      early = state.epochs_since_best >= cfg.patience;
    }
    state.history.push_back(summary);
    state.epoch += 1;
    state.shuffle_rng = rng_state(shuffle_rng);
    state.augment_rng = rng_state(augment_rng);
    state.finished = early || state.epoch >= cfg.epochs;
    if (!dir.empty()) save_checkpoint(state, dir);
    ++epochs_this_call;
    if (early) break;
    if (options.max_epochs_this_call && epochs_this_call >= *options.max_epochs_this_call) break;
  }

  if (role == Role::kStudent && teacher->params != teacher_snapshot) {
    throw std::logic_error("teacher parameters changed during student training");
  }
  return finish(early);
}

}  // namespace

TrainResult pretrain_teacher(const Dataset& train, const TrainConfig& cfg, const TrainOptions& options) {
  return run_training(train, cfg, options, Role::kSupervised, nullptr);
}

TrainResult train_student(const Model& teacher, const Dataset& train, const TrainConfig& cfg,
                          const TrainOptions& options) {
  return run_training(train, cfg, options, Role::kStudent, &teacher);
}

TrainResult train_da_baseline(const Dataset& train, const TrainConfig& cfg, const TrainOptions& options) {
  if (cfg.method != Method::kDaTd && cfg.method != Method::kDaWs) {
    throw ValidationError("train_da_baseline: method must be da_td or da_ws, got " + to_string(cfg.method));
  }
  return run_training(train, cfg, options, Role::kAugmented, nullptr);
}

double mean_cross_entropy(const Model& model, const Dataset& data) {
  if (data.samples.empty()) throw ValidationError("mean_cross_entropy: empty dataset");
  const Network net(model);
  double acc = 0.0;
  for (const auto& s : data.samples) {
    const auto out = net.forward(s.sits);
    acc += cross_entropy_from_logits(out.logits, out.num_classes, s.labels.classes);
  }
  return acc / data.samples.size();
}

}  // namespace frp
