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

// Command line front end: frp synth | preprocess | train | eval | report |
// run | validate.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "frp/common.hpp"
#include "frp/evaluation.hpp"
#include "frp/experiment.hpp"
#include "frp/preprocessing.hpp"
#include "frp/report.hpp"
#include "frp/training.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> parse_ratios(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw frp::ValidationError("--ratios: cannot parse '" + item + "'");
    }
  }
  return out;
}

int cmd_synth(const std::string& spec_path, const std::string& out, int n_samples, long long seed, bool rasters,
              int per_month, double max_cover) {
  frp::SyntheticSpec spec;
  if (!spec_path.empty()) {
    spec = frp::synthetic_spec_from_json(frp::parse_json_text(frp::read_text_file(spec_path), spec_path));
  }
  if (n_samples > 0) spec.n_samples = n_samples;
  if (seed >= 0) spec.seed = static_cast<uint64_t>(seed);
  const frp::Dataset data = frp::generate_synthetic_dataset(spec);
  if (rasters) {
    frp::write_raster_directory(frp::simulate_cloudy_acquisitions(data, per_month, max_cover, spec.seed), out);
    std::cout << "wrote " << data.samples.size() << " raster samples to " << out << "\n";
  } else {
    frp::save_dataset(data, out);
    std::cout << "wrote " << data.samples.size() << " samples to " << out << "\n";
  }
  return 0;
}

int cmd_preprocess(const std::string& in, const std::string& out, double missing, double clean) {
  const frp::PreprocessResult r = frp::preprocess_rasters(frp::read_raster_directory(in), {missing, clean});
  frp::save_dataset(r.dataset, out);
  json availability = json::array();
  int complete = 0;
  for (const auto& a : r.availability) {
    availability.push_back({{"id", a.id},
                            {"available", a.months.available},
                            {"cloud_ratio", a.months.cloud_ratio},
                            {"complete", a.complete}});
    complete += a.complete ? 1 : 0;
  }
  frp::write_text_file(fs::path(out) / "availability.json", availability.dump(2) + "\n");
  std::cout << "preprocessed " << r.dataset.samples.size() << " samples (" << complete << " complete) into " << out
            << "\n";
  return 0;
}

frp::Dataset normalized(const frp::Dataset& data) {
  return data.channel_stats.empty() ? frp::normalize_channels(data) : data;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out,
              const std::string& teacher_dir, const std::string& log_path) {
  json j = frp::parse_json_text(frp::read_text_file(config_path), config_path);
  const frp::Dataset train = normalized(frp::load_dataset(data_dir));
  j["backbone"]["in_channels"] = train.channels();
  j["backbone"]["num_classes"] = train.num_classes();
  const frp::TrainConfig cfg = frp::train_config_from_json(j);
  cfg.validate();

  std::ofstream log;
  frp::TrainOptions opts;
  opts.checkpoint_dir = out;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::app);
    if (!log) throw frp::IoError("cannot open log " + log_path);
    opts.log = &log;
  }
  frp::TrainResult r;
  switch (cfg.method) {
    case frp::Method::kOurs: {
      if (teacher_dir.empty()) throw frp::ValidationError("--teacher is required for method ours");
      const frp::Checkpoint t = frp::load_checkpoint(teacher_dir, cfg.backbone);
      r = frp::train_student(t.best_model ? *t.best_model : t.model, train, cfg, opts);
      break;
    }
    case frp::Method::kDaTd:
    case frp::Method::kDaWs: r = frp::train_da_baseline(train, cfg, opts); break;
    default: r = frp::pretrain_teacher(train, cfg, opts); break;
  }
  if (!r.history.empty()) {
    const auto& last = r.history.back().mean_loss;
    std::printf("trained %zu epochs; last epoch loss total %.6f (fr %.6f kd %.6f ce %.6f)\n", r.history.size(),
                last.total, last.l_fr, last.l_kd, last.l_ce);
  }
  std::cout << "checkpoint: " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_dir, const std::string& data_dir, const std::string& ratios,
             const std::string& mode, const std::string& imputer, long long seed, const std::string& out) {
  const frp::Checkpoint ckpt = frp::load_checkpoint(ckpt_dir);
  const frp::Model& model = ckpt.best_model ? *ckpt.best_model : ckpt.model;
  frp::Dataset test = frp::load_dataset(data_dir);
  if (test.channel_stats.empty()) {
    test = ckpt.channel_stats.empty() ? frp::normalize_channels(test) : frp::apply_channel_stats(test, ckpt.channel_stats);
  }
  frp::GapSpec spec{frp::gap_mode_from_string(mode), parse_ratios(ratios), frp::kDefaultEvalSeed};
  if (seed >= 0) spec.seed = static_cast<uint64_t>(seed);
  std::optional<frp::ImputeMethod> imp;
  if (!imputer.empty() && imputer != "none") imp = frp::impute_method_from_string(imputer);
  const auto reports = frp::evaluate(model, test, spec, imp);

  std::vector<frp::ResultRow> rows;
  std::printf("%-8s %8s %8s %8s %8s %8s\n", "ratio", "OA", "AA", "kappa", "mIoU", "meanF1");
  for (const auto& r : reports) {
    std::printf("%-8.2f %8.4f %8.4f %8.4f %8.4f %8.4f\n", r.ratio, r.metrics.oa, r.metrics.aa, r.metrics.kappa,
                r.metrics.miou, r.metrics.mean_f1);
    frp::ResultRow row;
    row.method = frp::to_string(ckpt.config.method) + (imp ? "+" + frp::to_string(*imp) : "");
    row.backbone = frp::to_string(model.config.kind);
    row.gap_mode = mode;
    row.ratio = r.ratio;
    row.seed = ckpt.config.seed;
    row.metrics = r.metrics;
    row.class_names = test.class_names();
    row.fingerprint = frp::fingerprint(frp::to_json(ckpt.config).dump());
    rows.push_back(row);
  }
  if (!out.empty()) {
    for (const auto& p : frp::emit_report(rows, out)) std::cout << "wrote " << p.string() << "\n";
  }
  return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
  fs::path src = in;
  if (fs::is_directory(src)) src /= "results.json";
  const auto rows = frp::read_results_json(src);
  for (const auto& p : frp::emit_report(rows, out)) std::cout << "wrote " << p.string() << "\n";
  return 0;
}

int cmd_run(const std::string& plan_path) {
  frp::RunOptions opts;
  opts.progress = &std::cerr;
  const auto r = frp::run_experiment(fs::path(plan_path), opts);
  std::cout << r.rows.size() << " result rows, " << r.models_trained << " models trained, " << r.models_reused
            << " reused; results in " << r.output_dir.string() << "\n";
  return 0;
}

int cmd_validate(const std::string& path) {
  const frp::Diagnostics d = frp::validate_config(path);
  for (const auto& e : d.errors) std::cout << "error: " << e << "\n";
  for (const auto& w : d.warnings) std::cout << "warning: " << w << "\n";
  if (d.ok() && d.warnings.empty()) std::cout << path << ": ok\n";
  return d.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frp: gap-robust crop mapping from satellite image time series"};
  app.require_subcommand(1);

  std::string spec_path, synth_out;
  int n_samples = 0, per_month = 3;
  long long synth_seed = -1;
  bool rasters = false;
  double max_cover = 0.6;
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
  synth->add_option("--spec", spec_path, "JSON generator spec");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n-samples", n_samples, "override the number of samples");
  synth->add_option("--seed", synth_seed, "override the generator seed");
  synth->add_flag("--rasters", rasters, "write raw cloudy acquisitions instead of a dataset");
  synth->add_option("--per-month", per_month, "acquisitions per month with --rasters");
  synth->add_option("--max-cover", max_cover, "largest cloud fraction with --rasters");

  std::string pre_in, pre_out;
  double missing = frp::kMissingThreshold, clean = frp::kCleanThreshold;
  auto* pre = app.add_subcommand("preprocess", "composite, flag and gap-fill raster acquisitions");
  pre->add_option("--in", pre_in, "raster directory")->required();
  pre->add_option("--out", pre_out, "dataset output directory")->required();
  pre->add_option("--missing-threshold", missing, "cloud ratio above which a month is missing");
  pre->add_option("--clean-threshold", clean, "cloud ratio below which a month counts as clean");

  std::string train_cfg, train_data, train_out, train_teacher, train_log;
  auto* train = app.add_subcommand("train", "train a model from a JSON config");
  train->add_option("--config", train_cfg, "training config")->required();
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "checkpoint directory")->required();
  train->add_option("--teacher", train_teacher, "teacher checkpoint (method ours)");
  train->add_option("--log", train_log, "JSON-lines training log");

  std::string ev_ckpt, ev_data, ev_ratios = "0", ev_mode = "random", ev_imputer, ev_out;
  long long ev_seed = -1;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint under simulated gaps");
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--ratios", ev_ratios, "comma separated missing ratios");
  ev->add_option("--gap-mode", ev_mode, "none, random, window or availability");
  ev->add_option("--imputer", ev_imputer, "linear-in, closest-in or last-in");
  ev->add_option("--seed", ev_seed, "evaluation gap seed");
  ev->add_option("--out", ev_out, "write a report into this directory");

  std::string rep_in, rep_out;
  auto* rep = app.add_subcommand("report", "render reports from results.json");
  rep->add_option("--in", rep_in, "results directory or results.json")->required();
  rep->add_option("--out", rep_out, "output directory")->required();

  std::string plan_path;
  auto* run = app.add_subcommand("run", "run an experiment plan");
  run->add_option("plan", plan_path, "plan JSON")->required();

  std::string cfg_path;
  auto* val = app.add_subcommand("validate", "check a plan or training config");
  val->add_option("config", cfg_path, "JSON file")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(spec_path, synth_out, n_samples, synth_seed, rasters, per_month, max_cover);
    if (*pre) return cmd_preprocess(pre_in, pre_out, missing, clean);
    if (*train) return cmd_train(train_cfg, train_data, train_out, train_teacher, train_log);
    if (*ev) return cmd_eval(ev_ckpt, ev_data, ev_ratios, ev_mode, ev_imputer, ev_seed, ev_out);
    if (*rep) return cmd_report(rep_in, rep_out);
    if (*run) return cmd_run(plan_path);
    if (*val) return cmd_validate(cfg_path);
  } catch (const std::exception& e) {
    std::cerr << "frp: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
