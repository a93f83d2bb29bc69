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

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "frp/backbones.hpp"
#include "frp/gap_simulation.hpp"
#include "test_util.hpp"

namespace {

using namespace frp;

BackboneConfig small_tae() {
  BackboneConfig c;
  c.kind = BackboneKind::kTinyTae;
  c.in_channels = 2;
  c.num_classes = 3;
  c.widths = {4, 4, 6};
  c.decoder_width = 5;
  c.heads = 2;
  c.key_dim = 3;
  return c;
}

BackboneConfig small_rnn() {
  BackboneConfig c;
  c.kind = BackboneKind::kTinyRnn;
  c.in_channels = 2;
  c.num_classes = 3;
  c.widths = {4};
  c.hidden = 3;
  c.decoder_width = 4;
  return c;
}

// Scalar probe loss sum(a * fused) + sum(b * logits).
double probe(const ModelOutputs& o, const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * o.fused_feature[i];
  for (size_t i = 0; i < b.size(); ++i) s += b[i] * o.logits[i];
  return s;
}

// Central differences on the float64 engine.  The float parameter is
// nudged, so the step actually taken is measured after rounding.
void check_gradients(const BackboneConfig& cfg, int T, int H, int W) {
  Rng rng(11);
  Model model = build_backbone(cfg, 5);
  // Nonzero biases so ReLUs are not all at the same side.
  for (auto& p : model.params)
    for (auto& v : p.values) v += static_cast<float>(uniform(rng, -0.05, 0.05));
  const SITSample s = testutil::random_sample(T, cfg.in_channels, H, W, rng);

  const Network net(model, Precision::kDouble);
  Trace trace;
  const ModelOutputs out = net.forward(s, &trace);
  std::vector<double> a(out.fused_feature.size()), b(out.logits.size());
  for (auto& v : a) v = uniform(rng, -1.0, 1.0);
  for (auto& v : b) v = uniform(rng, -1.0, 1.0);
  Gradients grads = zero_gradients(model);
  net.backward(trace, a, b, grads);

  int checked = 0, bad = 0;
  double worst = 0.0;
  for (size_t i = 0; i < model.params.size(); ++i) {
    for (size_t j = 0; j < model.params[i].values.size(); ++j) {
      Model plus = model, minus = model;
      const float base = model.params[i].values[j];
      plus.params[i].values[j] = base + 1e-3f;
      minus.params[i].values[j] = base - 1e-3f;
      const double step = static_cast<double>(plus.params[i].values[j]) - minus.params[i].values[j];
      const double fp = probe(Network(plus, Precision::kDouble).forward(s), a, b);
      const double fm = probe(Network(minus, Precision::kDouble).forward(s), a, b);
      const double numeric = (fp - fm) / step;
      const double analytic = grads[i][j];
      const double err = std::abs(numeric - analytic) / std::max(1e-4, std::abs(numeric) + std::abs(analytic));
      worst = std::max(worst, err);
      ++checked;
      // A ReLU kink inside the step can spoil a single difference.
      if (err > 1e-3) ++bad;
    }
  }
  INFO("checked " << checked << " worst " << worst << " bad " << bad);
  CHECK(bad <= checked / 100);
}

}  // namespace

TEST_CASE("tiny_tae analytic gradients match central differences") { check_gradients(small_tae(), 4, 8, 8); }

TEST_CASE("tiny_rnn analytic gradients match central differences") { check_gradients(small_rnn(), 3, 5, 4); }

TEST_CASE("forward is deterministic and shapes follow the config") {
  Rng rng(3);
  const BackboneConfig cfg = small_tae();
  const Model m = build_backbone(cfg, 9);
  CHECK(m == build_backbone(cfg, 9));
  CHECK_FALSE(m == build_backbone(cfg, 10));
  const SITSample s = testutil::random_sample(5, 2, 8, 12, rng);
  const ModelOutputs a = forward(m, s), b = forward(m, s);
  CHECK(a.logits == b.logits);
  CHECK(a.feature_channels == 6);
  CHECK(a.feature_height == 2);
  CHECK(a.feature_width == 3);
  CHECK(a.attention.size() == 2u * 5 * 2 * 3);
  // Attention is a distribution over time at every position.
  for (int h = 0; h < 2; ++h)
    for (int p = 0; p < 6; ++p) {
      double sum = 0.0;
      for (int t = 0; t < 5; ++t) sum += a.attention[(h * 5 + t) * 6 + p];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
  for (int p = 0; p < 96; ++p) {
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) sum += a.probs[k * 96 + p];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("shortened sequences run through both backbones") {
  Rng rng(4);
  for (const auto& cfg : {small_tae(), small_rnn()}) {
    const Model m = build_backbone(cfg, 1);
    const SITSample s = testutil::random_sample(8, 2, 8, 8, rng);
    const GapResult g = temporal_mask(s, 0.5, rng);
    const ModelOutputs full = forward(m, s), part = forward(m, g.sample);
    CHECK(full.logits.size() == part.logits.size());
    CHECK(full.fused_feature.size() == part.fused_feature.size());
  }
}

TEST_CASE("float and double engines agree") {
  Rng rng(6);
  const Model m = build_backbone(small_tae(), 2);
  const SITSample s = testutil::random_sample(6, 2, 8, 8, rng);
  const auto f = Network(m, Precision::kFloat).forward(s);
  const auto d = Network(m, Precision::kDouble).forward(s);
  for (size_t i = 0; i < f.logits.size(); ++i) CHECK(f.logits[i] == doctest::Approx(d.logits[i]).epsilon(1e-4));
}

TEST_CASE("argmax prediction breaks ties toward the lowest class") {
  ModelOutputs o;
  o.num_classes = 3;
  o.height = 1;
  o.width = 2;
  o.probs = {0.4, 0.2, 0.4, 0.6, 0.2, 0.2};  // [K][P]
  const auto pred = o.predict();
  CHECK(pred[0] == 0);
  CHECK(pred[1] == 1);
}

TEST_CASE("day-of-year encoding") {
  const auto pe = day_of_year_encoding(0, 4);
  CHECK(pe[0] == doctest::Approx(0.0));
  CHECK(pe[1] == doctest::Approx(1.0));
  const auto q = day_of_year_encoding(366 / 4, 2);
  CHECK(q[0] == doctest::Approx(std::sin(2 * M_PI * 91 / 366.0)));
}

TEST_CASE("input validation") {
  const Model m = build_backbone(small_tae(), 0);
  Rng rng(1);
  CHECK_THROWS_AS(forward(m, testutil::random_sample(3, 3, 8, 8, rng)), ValidationError);
  CHECK_THROWS_AS(forward(m, testutil::random_sample(3, 2, 6, 8, rng)), ValidationError);
  BackboneConfig bad = small_tae();
  bad.widths = {4, 4, 5};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("model save/load round-trips bitwise and checks the architecture") {
  const auto dir = testutil::temp_dir("model_io");
  const Model m = build_backbone(small_rnn(), 42);
  save_model(m, dir);
  CHECK(load_model(dir) == m);
  CHECK(load_model(dir, small_rnn()) == m);
  CHECK_THROWS_AS(load_model(dir, small_tae()), FormatError);
  std::filesystem::resize_file(dir / "params.bin", 12);
  CHECK_THROWS_AS(load_model(dir), FormatError);
}
