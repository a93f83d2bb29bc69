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

#include "frp/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>

#include "frp/common.hpp"
#include "frp/evaluation.hpp"
#include "json_fields.hpp"

namespace frp {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic spec JSON

json to_json(const SyntheticSpec& s) {
  json classes = json::array();
  for (const auto& p : s.classes) {
    classes.push_back({{"amplitude", p.amplitude},
                       {"season_start", p.season_start},
                       {"season_end", p.season_end},
                       {"base", p.base}});
  }
  return {{"n_samples", s.n_samples},
          {"T", s.T},
          {"C", s.C},
          {"H", s.H},
          {"W", s.W},
          {"K", s.K},
          {"seed", s.seed},
          {"classes", classes},
          {"dates", s.dates},
          {"noise_std", s.noise_std},
          {"field_geometry", s.field_geometry == FieldGeometry::kRectangles ? "rectangles" : "voronoi"},
          {"slope_days", s.slope_days},
          {"date_jitter", s.date_jitter},
          {"amplitude_jitter", s.amplitude_jitter},
          {"min_field_size", s.min_field_size},
          {"max_field_size", s.max_field_size}};
}

namespace {

SyntheticSpec synthetic_from_fields(const detail::Fields& f) {
  f.allow({"n_samples", "T", "C", "H", "W", "K", "seed", "classes", "dates", "noise_std", "field_geometry",
           "slope_days", "date_jitter", "amplitude_jitter", "min_field_size", "max_field_size"});
  SyntheticSpec s;
  s.n_samples = f.integer("n_samples", s.n_samples);
  s.T = f.integer("T", s.T);
  s.C = f.integer("C", s.C);
  s.H = f.integer("H", s.H);
  s.W = f.integer("W", s.W);
  s.K = f.integer("K", s.K);
  s.seed = f.unsigned_integer("seed", s.seed);
  s.dates = f.integers("dates", {});
  s.noise_std = f.number("noise_std", s.noise_std);
  const std::string geometry = f.string("field_geometry", "rectangles");
  if (geometry == "rectangles") {
    s.field_geometry = FieldGeometry::kRectangles;
  } else if (geometry == "voronoi") {
    s.field_geometry = FieldGeometry::kVoronoi;
  } else {
    throw ValidationError(f.path_of("field_geometry") + "expected \"rectangles\" or \"voronoi\"");
  }
  s.slope_days = f.number("slope_days", s.slope_days);
  s.date_jitter = f.number("date_jitter", s.date_jitter);
  s.amplitude_jitter = f.number("amplitude_jitter", s.amplitude_jitter);
  s.min_field_size = f.integer("min_field_size", s.min_field_size);
  s.max_field_size = f.integer("max_field_size", s.max_field_size);
  if (f.has("classes")) {
    const auto& arr = f.raw("classes");
    if (!arr.is_array()) throw ValidationError(f.path_of("classes") + "expected an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      const detail::Fields c(arr[i], f.path() + (f.path().empty() ? "" : ".") + "classes[" + std::to_string(i) + "]");
      c.allow({"amplitude", "season_start", "season_end", "base"});
      Phenology p;
      p.amplitude = c.number("amplitude", p.amplitude);
      p.season_start = c.number("season_start", p.season_start);
      p.season_end = c.number("season_end", p.season_end);
      p.base = c.number("base", p.base);
      s.classes.push_back(p);
    }
  }
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(f.path_of("") + e.what());
  }
  return s;
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const json& j) { return synthetic_from_fields(detail::Fields(j, "")); }

// ---------------------------------------------------------------------------
// Plans

ExperimentPlan plan_from_json(const json& j) {
  const detail::Fields f(j, "");
  f.allow({"schema", "name", "output_dir", "dataset", "split", "validation_fraction", "backbones", "seeds", "train",
           "teacher", "methods", "evaluation"});
  if (f.integer("schema", 0) != 1) throw ValidationError("schema: expected 1");
  ExperimentPlan p;
  p.name = f.string("name", p.name);
  if (p.name.empty() || p.name.find('/') != std::string::npos) {
    throw ValidationError("name: must be a non-empty name without '/'");
  }
  p.output_dir = f.string("output_dir", p.output_dir.string());

  if (!f.has("dataset")) throw ValidationError("dataset: required");
  const detail::Fields d = f.child("dataset");
  d.allow({"synthetic", "path"});
  if (d.has("synthetic") == d.has("path")) throw ValidationError("dataset: give exactly one of synthetic or path");
  if (d.has("synthetic")) synthetic_from_fields(d.child("synthetic"));
  if (d.has("path")) d.string("path", "");
  p.dataset = f.raw("dataset");

  if (f.has("split")) {
    const detail::Fields s = f.child("split");
    s.allow({"train_fraction", "seed"});
    p.train_fraction = s.number("train_fraction", p.train_fraction);
    p.split_seed = s.unsigned_integer("seed", p.split_seed);
    if (!(p.train_fraction > 0.0 && p.train_fraction < 1.0)) {
      throw ValidationError("split.train_fraction: must lie in (0, 1)");
    }
  }
  p.validation_fraction = f.number("validation_fraction", p.validation_fraction);
  if (!(p.validation_fraction >= 0.0 && p.validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction: must lie in [0, 1)");
  }

  if (f.has("backbones")) {
    const auto& arr = f.raw("backbones");
    if (!arr.is_array() || arr.empty()) throw ValidationError("backbones: expected a non-empty array");
    for (const auto& b : arr) {
      if (!b.is_object()) throw ValidationError("backbones: entries must be objects");
      p.backbones.push_back(b);
    }
  } else {
    p.backbones.push_back({{"kind", "tiny_tae"}});
  }

  if (f.has("seeds")) {
    const auto& arr = f.raw("seeds");
    if (!arr.is_array() || arr.empty()) throw ValidationError("seeds: expected a non-empty array");
    p.seeds.clear();
    for (const auto& s : arr) {
      if (!s.is_number_unsigned()) throw ValidationError("seeds: expected nonnegative integers");
      p.seeds.push_back(s.get<uint64_t>());
    }
  }
  if (f.has("train")) {
    f.child("train");
    p.train = f.raw("train");
  }
  if (f.has("teacher")) {
    f.child("teacher");
    p.teacher = f.raw("teacher");
  }

  if (!f.has("methods")) throw ValidationError("methods: required");
  const auto& methods = f.raw("methods");
  if (!methods.is_array() || methods.empty()) throw ValidationError("methods: expected a non-empty array");
  for (size_t i = 0; i < methods.size(); ++i) {
    const std::string path = "methods[" + std::to_string(i) + "]";
    if (!methods[i].is_object()) throw ValidationError(path + ": expected an object");
    const detail::Fields m(methods[i], path);
    if (!m.has("method")) throw ValidationError(path + ".method: required");
    MethodEntry e;
    try {
      e.method = method_from_string(m.string("method", ""));
    } catch (const ValidationError& err) {
      throw ValidationError(path + "." + err.what());
    }
    e.label = m.string("name", to_string(e.method));
    e.overrides = methods[i];
    e.overrides.erase("name");
    e.overrides.erase("method");
    for (const auto& other : p.methods) {
      if (other.label == e.label) throw ValidationError(path + ".name: duplicate method label '" + e.label + "'");
    }
    p.methods.push_back(std::move(e));
  }

  if (f.has("evaluation")) {
    const detail::Fields e = f.child("evaluation");
    e.allow({"gap_modes", "ratios", "seed"});
    if (e.has("gap_modes")) {
      const auto& arr = e.raw("gap_modes");
      if (!arr.is_array() || arr.empty()) throw ValidationError("evaluation.gap_modes: expected a non-empty array");
      p.gap_modes.clear();
      for (const auto& g : arr) {
        if (!g.is_string()) throw ValidationError("evaluation.gap_modes: expected strings");
        try {
          gap_mode_from_string(g.get<std::string>());
        } catch (const ValidationError& err) {
          throw ValidationError(std::string("evaluation.gap_modes: ") + err.what());
        }
        p.gap_modes.push_back(g.get<std::string>());
      }
    }
    if (e.has("ratios")) {
      p.ratios = e.numbers("ratios");
      GapSpec spec{GapMode::kRandom, p.ratios, 0};
      try {
        spec.validate();
      } catch (const ValidationError& err) {
        throw ValidationError(std::string("evaluation.") + err.what());
      }
    }
    p.eval_seed = e.unsigned_integer("seed", p.eval_seed);
  }

  // Resolve every cell once so config errors surface before any work.
  int channels = 4, classes = 4;
  if (p.dataset.contains("synthetic")) {
    const SyntheticSpec s = synthetic_spec_from_json(p.dataset.at("synthetic"));
    channels = s.C;
    classes = s.K;
  }
  for (const auto& b : p.backbones) {
    for (const auto& m : p.methods) resolve_config(p, m, b, p.seeds.front(), channels, classes);
    resolve_teacher_config(p, b, p.seeds.front(), channels, classes);
  }
  return p;
}

json to_json(const ExperimentPlan& p) {
  json methods = json::array();
  for (const auto& m : p.methods) {
    json e = m.overrides;
    e["name"] = m.label;
    e["method"] = to_string(m.method);
    methods.push_back(e);
  }
  return {{"schema", 1},
          {"name", p.name},
          {"output_dir", p.output_dir.string()},
          {"dataset", p.dataset},
          {"split", {{"train_fraction", p.train_fraction}, {"seed", p.split_seed}}},
          {"validation_fraction", p.validation_fraction},
          {"backbones", p.backbones},
          {"seeds", p.seeds},
          {"train", p.train},
          {"teacher", p.teacher},
          {"methods", methods},
          {"evaluation", {{"gap_modes", p.gap_modes}, {"ratios", p.ratios}, {"seed", p.eval_seed}}}};
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1, col = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw FormatError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error: " +
                      e.what());
  }
}

ExperimentPlan load_plan(const fs::path& path) {
  return plan_from_json(parse_json_text(read_text_file(path), path.string()));
}

namespace {

json completed_backbone(const json& backbone, int channels, int classes) {
  json b = backbone;
  b["in_channels"] = channels;
  b["num_classes"] = classes;
  return b;
}

TrainConfig resolve(const json& base, const json& overrides, Method method, const json& backbone, uint64_t seed,
                    int channels, int classes, const std::string& where) {
  json j = base;
  j.merge_patch(overrides);
  j["method"] = to_string(method);
  j["seed"] = seed;
  j["backbone"] = completed_backbone(backbone, channels, classes);
  try {
    TrainConfig cfg = train_config_from_json(j);
    cfg.validate();
    return cfg;
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

}  // namespace

TrainConfig resolve_config(const ExperimentPlan& plan, const MethodEntry& entry, const json& backbone, uint64_t seed,
                           int channels, int classes) {
  return resolve(plan.train, entry.overrides, entry.method, backbone, seed, channels, classes,
                 "method '" + entry.label + "'");
}

TrainConfig resolve_teacher_config(const ExperimentPlan& plan, const json& backbone, uint64_t seed, int channels,
                                   int classes) {
  return resolve(plan.train, plan.teacher, Method::kBaseline, backbone, seed, channels, classes, "teacher");
}

fs::path results_directory(const ExperimentPlan& plan) {
  if (const char* root = std::getenv("FRP_RESULTS_DIR"); root && *root) return fs::path(root) / plan.name;
  return plan.output_dir;
}

// ---------------------------------------------------------------------------
// Validation

Diagnostics validate_config(const fs::path& path) {
  Diagnostics d;
  json j;
  try {
    j = parse_json_text(read_text_file(path), path.string());
  } catch (const std::exception& e) {
    d.errors.push_back(e.what());
    return d;
  }
  try {
    if (j.is_object() && j.contains("methods")) {
      const ExperimentPlan plan = plan_from_json(j);
      for (const auto& m : plan.methods) {
        if (m.method != Method::kOurs) continue;
        const TrainConfig cfg = resolve_config(plan, m, plan.backbones.front(), 0, 4, 4);
        if (cfg.modules.FR && cfg.loss.sigma == 0.0) {
          d.warnings.push_back("method '" + m.label + "': modules.FR is on but loss.sigma is 0");
        }
        if (cfg.modules.KD && cfg.loss.gamma == 0.0) {
          d.warnings.push_back("method '" + m.label + "': modules.KD is on but loss.gamma is 0");
        }
      }
    } else {
      const TrainConfig cfg = train_config_from_json(j);
      cfg.validate();
      if (cfg.method == Method::kOurs && cfg.modules.FR && cfg.loss.sigma == 0.0) {
        d.warnings.push_back("modules.FR is on but loss.sigma is 0");
      }
      if (cfg.method == Method::kOurs && cfg.modules.KD && cfg.loss.gamma == 0.0) {
        d.warnings.push_back("modules.KD is on but loss.gamma is 0");
      }
    }
  } catch (const std::exception& e) {
    d.errors.push_back(e.what());
  }
  return d;
}

// ---------------------------------------------------------------------------
// Running

PreparedData prepare_data(const ExperimentPlan& plan) {
  Dataset all;
  if (plan.dataset.contains("synthetic")) {
    all = generate_synthetic_dataset(synthetic_spec_from_json(plan.dataset.at("synthetic")));
  } else {
    all = load_dataset(plan.dataset.at("path").get<std::string>());
  }
  auto [train, test] = split_dataset(all, plan.train_fraction, plan.split_seed);
  PreparedData out;
  if (plan.validation_fraction > 0.0) {
    auto [fit, val] = split_dataset(train, 1.0 - plan.validation_fraction, mix_seed(plan.split_seed, 1));
    train = std::move(fit);
    out.validation = std::move(val);
  }
  out.train = normalize_channels(train);
  if (!out.validation.samples.empty()) out.validation = apply_channel_stats(out.validation, out.train.channel_stats);
  out.test = apply_channel_stats(test, out.train.channel_stats);
  out.test.split = Split::kTest;
  return out;
}

namespace {

class StatusFile {
 public:
  StatusFile(fs::path path, std::string plan) : path_(std::move(path)), plan_(std::move(plan)) {}

  void stage(const std::string& name) {
    current_ = name;
    write("running", "");
  }
  void done() {
    completed_.push_back(current_);
    write("running", "");
  }
  void fail(const std::string& error) { write("failed", error); }
  void complete() {
    current_ = "done";
    write("complete", "");
  }

 private:
  void write(const std::string& state, const std::string& error) {
    json j = {{"schema", 1}, {"plan", plan_}, {"state", state}, {"stage", current_}, {"completed", completed_}};
    if (!error.empty()) j["error"] = error;
    write_text_file(path_, j.dump(2) + "\n");
  }

  fs::path path_;
  std::string plan_;
  std::string current_;
  std::vector<std::string> completed_;
};

std::optional<ImputeMethod> imputer_for(Method m) {
  switch (m) {
    case Method::kLinearIn: return ImputeMethod::kLinear;
    case Method::kClosestIn: return ImputeMethod::kClosest;
    case Method::kLastIn: return ImputeMethod::kLast;
    default: return std::nullopt;
  }
}

double validation_mean_f1(const Model& model, const Dataset& val, const std::vector<double>& ratios) {
  const auto reports = evaluate(model, val, GapSpec{GapMode::kRandom, ratios, kDefaultEvalSeed ^ 0x7A11});
  double acc = 0.0;
  for (const auto& r : reports) acc += r.metrics.mean_f1;
  return acc / reports.size();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentPlan& plan, const RunOptions& options) {
  using clock = std::chrono::steady_clock;
  ExperimentResult result;
  result.output_dir = results_directory(plan);
  const fs::path& out = result.output_dir;
  std::error_code ec;
  fs::create_directories(out / "models", ec);
  fs::create_directories(out / "evals", ec);
  if (ec) throw IoError("cannot create results directory " + out.string() + ": " + ec.message());
  write_text_file(out / "plan.resolved.json", to_json(plan).dump(2) + "\n");

  StatusFile status(out / "status.json", plan.name);
  auto say = [&](const std::string& msg) {
    if (options.progress) *options.progress << "[frp] " << msg << std::endl;
  };

  try {
    status.stage("prepare_data");
    const PreparedData data = prepare_data(plan);
    const int channels = data.train.channels();
    const int classes = data.train.num_classes();
    const auto class_names = data.train.class_names();
    const json data_key = {{"dataset", plan.dataset},
                           {"train_fraction", plan.train_fraction},
                           {"split_seed", plan.split_seed},
                           {"validation_fraction", plan.validation_fraction}};
    say("data: " + std::to_string(data.train.samples.size()) + " train, " +
        std::to_string(data.validation.samples.size()) + " validation, " + std::to_string(data.test.samples.size()) +
        " test");
    status.done();

    TrainOptions base_options;
    if (!data.validation.samples.empty()) {
      base_options.validation_score = [&](const Model& m) {
        return validation_mean_f1(m, data.validation, plan.ratios);
      };
    }

    // Trains (or reuses) a model keyed by everything that determines it.
    std::map<std::string, Model> memo;
    auto obtain = [&](const std::string& stage, const TrainConfig& cfg, const Model* teacher,
                      const std::string& teacher_key) -> std::pair<Model, std::string> {
      json key = {{"data", data_key}, {"config", to_json(cfg)}};
      if (teacher) key["teacher"] = teacher_key;
      const std::string fp = fingerprint(key.dump());
      if (auto it = memo.find(fp); it != memo.end()) return {it->second, fp};
      status.stage(stage);
      const fs::path dir = out / "models" / fp;
      const bool reuse = fs::exists(dir / "checkpoint.json") && load_checkpoint(dir).finished;
      const auto t0 = clock::now();
      std::ofstream log;
      TrainOptions opts = base_options;
      opts.checkpoint_dir = dir;
      if (!reuse) {
        log.open(out / "models" / (fp + ".log.jsonl"), std::ios::app);
        opts.log = &log;
      }
      TrainResult r;
      if (cfg.method == Method::kOurs) {
        r = train_student(*teacher, data.train, cfg, opts);
      } else if (cfg.method == Method::kDaTd || cfg.method == Method::kDaWs) {
        r = train_da_baseline(data.train, cfg, opts);
      } else {
        r = pretrain_teacher(data.train, cfg, opts);
      }
      const double secs = std::chrono::duration<double>(clock::now() - t0).count();
      if (reuse) {
        ++result.models_reused;
        say(stage + ": reused checkpoint " + fp);
      } else {
        ++result.models_trained;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", secs);
        say(stage + ": trained " + std::to_string(r.history.size()) + " epochs in " + buf + " s -> " + fp);
      }
      status.done();
      memo.emplace(fp, r.model);
      return {r.model, fp};
    };

    for (const auto& backbone : plan.backbones) {
      const std::string bname = backbone.value("kind", std::string("tiny_tae"));
      for (const auto& entry : plan.methods) {
        for (uint64_t seed : plan.seeds) {
          const std::string cell = entry.label + "/" + bname + "/seed" + std::to_string(seed);
          TrainConfig cfg = resolve_config(plan, entry, backbone, seed, channels, classes);
          const std::optional<ImputeMethod> imputer = imputer_for(cfg.method);
          if (imputer) cfg.method = Method::kBaseline;  // same model as baseline
          std::optional<Model> teacher;
          std::string teacher_fp;
          json teacher_cfg_json = nullptr;
          if (cfg.method == Method::kOurs) {
            const TrainConfig tcfg = resolve_teacher_config(plan, backbone, seed, channels, classes);
            auto [tm, tfp] = obtain("train:teacher/" + bname + "/seed" + std::to_string(seed), tcfg, nullptr, "");
            teacher = std::move(tm);
            teacher_fp = tfp;
            teacher_cfg_json = to_json(tcfg);
          }
          auto [model, model_fp] = obtain("train:" + cell, cfg, teacher ? &*teacher : nullptr, teacher_fp);

          const json row_key = {{"data", data_key},
                                {"config", to_json(cfg)},
                                {"teacher", teacher_cfg_json},
                                {"imputer", imputer ? to_string(*imputer) : std::string("none")},
                                {"label", entry.label},
                                {"evaluation", {{"ratios", plan.ratios}, {"seed", plan.eval_seed}}}};
          const std::string row_fp = fingerprint(row_key.dump());
          for (const auto& mode : plan.gap_modes) {
            const fs::path cache = out / "evals" / (row_fp + "_" + mode + ".json");
            std::vector<ResultRow> rows;
            if (fs::exists(cache)) {
              rows = read_results_json(cache);
            } else {
              status.stage("evaluate:" + cell + "/" + mode);
              const GapSpec spec{gap_mode_from_string(mode), plan.ratios, plan.eval_seed};
              for (const auto& rep : evaluate(model, data.test, spec, imputer)) {
                ResultRow row;
                row.method = entry.label;
                row.backbone = bname;
                row.gap_mode = mode;
                row.ratio = rep.ratio;
                row.seed = seed;
                row.metrics = rep.metrics;
                row.metrics.fingerprint = row_fp;
                row.class_names = class_names;
                row.fingerprint = row_fp;
                rows.push_back(row);
              }
              emit_report(rows, out / "evals" / "tmp", ReportFormats{false, true, false, false});
              fs::rename(out / "evals" / "tmp" / "results.json", cache);
              fs::remove_all(out / "evals" / "tmp");
              status.done();
            }
            result.rows.insert(result.rows.end(), rows.begin(), rows.end());
          }
        }
      }
    }

    status.stage("report");
    result.files = emit_report(result.rows, out);
    status.done();
    status.complete();
    say("report written to " + out.string());
  } catch (const std::exception& e) {
    status.fail(e.what());
    throw;
  }
  return result;
}

ExperimentResult run_experiment(const fs::path& plan_path, const RunOptions& options) {
  return run_experiment(load_plan(plan_path), options);
}

}  // namespace frp
