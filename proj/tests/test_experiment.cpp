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


#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "frp/experiment.hpp"
#include "test_util.hpp"

using namespace frp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tiny_plan(const fs::path& out) {
  json j = json::parse(R"({
    "schema": 1,
    "name": "tiny",
    "dataset": {"synthetic": {"n_samples": 8, "C": 2, "K": 3, "T": 6, "H": 8, "W": 8,
                              "min_field_size": 2, "max_field_size": 6, "seed": 2}},
    "split": {"train_fraction": 0.5, "seed": 1},
    "backbones": [{"kind": "tiny_tae", "widths": [4, 4, 4], "decoder_width": 4, "heads": 2, "key_dim": 2}],
    "seeds": [0],
    "train": {"epochs": 1, "batch_size": 2},
    "methods": [
      {"name": "baseline", "method": "baseline"},
      {"name": "ours", "method": "ours"},
      {"name": "da_td", "method": "da_td"},
      {"name": "linear-in", "method": "linear_in"}
    ],
    "evaluation": {"gap_modes": ["random", "window"], "ratios": [0, 0.5]}
  })");
  j["output_dir"] = out.string();
  return j;
}

Diagnostics validate_text(const std::string& name, const json& j) {
  const auto dir = testutil::temp_dir("validate_" + name);
  write_text_file(dir / "cfg.json", j.dump(2));
  return validate_config(dir / "cfg.json");
}

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += x + "\n";
  return s;
}

}  // namespace

TEST_CASE("a good plan validates without diagnostics") {
  const auto d = validate_text("good", tiny_plan("/tmp/unused"));
  CHECK(d.ok());
  CHECK(d.warnings.empty());
}

TEST_CASE("validation reports field paths") {
  json j = tiny_plan("/tmp/unused");
  j["train"]["optimizer"] = {{"lr", -0.1}};
  const auto d = validate_text("lr", j);
  REQUIRE_FALSE(d.ok());
  CHECK(joined(d.errors).find("optimizer.lr") != std::string::npos);

  json m = tiny_plan("/tmp/unused");
  m["train"]["mask"] = {{"M", 0.9}, {"N", 0.2}};
  const auto dm = validate_text("mask", m);
  REQUIRE_FALSE(dm.ok());
  CHECK(joined(dm.errors).find("mask.M must not exceed mask.N") != std::string::npos);

  json w = tiny_plan("/tmp/unused");
  w["train"]["loss"] = {{"sigma", 0.0}};
  const auto dw = validate_text("warn", w);
  CHECK(dw.ok());
  CHECK(joined(dw.warnings).find("loss.sigma is 0") != std::string::npos);

  const auto dir = testutil::temp_dir("validate_syntax");
  write_text_file(dir / "bad.json", "{\n  \"schema\": 1,\n  oops\n}");
  const auto ds = validate_config(dir / "bad.json");
  REQUIRE_FALSE(ds.ok());
  CHECK(joined(ds.errors).find("line 3") != std::string::npos);

  json u = tiny_plan("/tmp/unused");
  u["evaluation"]["ratio"] = {0.5};
  CHECK_FALSE(validate_text("unknown", u).ok());
}

TEST_CASE("plans resolve method overrides over the base config") {
  json j = tiny_plan("/tmp/unused");
  j["methods"][1]["modules"] = {{"KD", false}};
  j["methods"][1]["epochs"] = 3;
  const auto plan = plan_from_json(j);
  CHECK(plan.methods.size() == 4);
  const auto cfg = resolve_config(plan, plan.methods[1], plan.backbones[0], 7, 2, 3);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.batch_size == 2);
  CHECK_FALSE(cfg.modules.KD);
  CHECK(cfg.modules.FR);
  CHECK(cfg.seed == 7);
  CHECK(cfg.method == Method::kOurs);
  CHECK(cfg.backbone.in_channels == 2);
  CHECK(cfg.backbone.num_classes == 3);
  const auto t = resolve_teacher_config(plan, plan.backbones[0], 7, 2, 3);
  CHECK(t.method == Method::kBaseline);
  CHECK(t.epochs == 1);
  CHECK(to_json(plan_from_json(to_json(plan))) == to_json(plan));
}

TEST_CASE("tiny plan runs end to end and reruns from cache") {
  const auto out = testutil::temp_dir("tiny_plan");
  const auto plan = plan_from_json(tiny_plan(out));
  std::ostringstream progress;
  const auto first = run_experiment(plan, {&progress});
  // 2 modes x 2 ratios x 4 methods.
  CHECK(first.rows.size() == 16);
  // baseline (reused by linear-in and as teacher), ours, da_td.
  CHECK(first.models_trained == 3);
  for (const char* f : {"results.csv", "results.json", "results.md", "plan.resolved.json", "status.json"})
    CHECK(fs::exists(out / f));
  const auto status = json::parse(read_text_file(out / "status.json"));
  CHECK(status.at("state") == "complete");

  const std::string csv = read_text_file(out / "results.csv");
  const auto second = run_experiment(plan);
  CHECK(second.models_trained == 0);
  CHECK(second.models_reused == 3);
  CHECK(second.rows == first.rows);
  CHECK(read_text_file(out / "results.csv") == csv);

  // Every method sees the same view at ratio 0, so the complete-sequence
  // score of linear-in equals the baseline's.
  for (const auto& mode : {"random", "window"})
    CHECK(median_mean_f1(first.rows, "linear-in", mode, 0.0) == median_mean_f1(first.rows, "baseline", mode, 0.0));
}

TEST_CASE("results directory honours FRP_RESULTS_DIR") {
  const auto plan = plan_from_json(tiny_plan("/tmp/somewhere"));
  ::unsetenv("FRP_RESULTS_DIR");
  CHECK(results_directory(plan) == fs::path("/tmp/somewhere"));
  ::setenv("FRP_RESULTS_DIR", "/tmp/root", 1);
  CHECK(results_directory(plan) == fs::path("/tmp/root/tiny"));
  ::unsetenv("FRP_RESULTS_DIR");
}

TEST_CASE("plan errors name the field") {
  json j = tiny_plan("/tmp/unused");
  j["methods"][0]["method"] = "magic";
  CHECK_THROWS_AS(plan_from_json(j), ValidationError);
  json k = tiny_plan("/tmp/unused");
  k.erase("schema");
  CHECK_THROWS_AS(plan_from_json(k), ValidationError);
}
