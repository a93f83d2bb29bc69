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

#include "frp/sits_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "json.hpp"

namespace frp {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// SITSample / LabelMap / Dataset

SITSample SITSample::zeros(std::string id, int T, int C, int H, int W, std::vector<int> dates) {
  SITSample s;
  s.id = std::move(id);
  s.T = T;
  s.C = C;
  s.H = H;
  s.W = W;
  s.values.assign(static_cast<size_t>(T) * C * H * W, 0.0f);
  s.valid.assign(static_cast<size_t>(T) * H * W, 1);
  s.dates = std::move(dates);
  return s;
}

bool SITSample::all_valid() const {
  return std::all_of(valid.begin(), valid.end(), [](uint8_t v) { return v != 0; });
}

void SITSample::validate() const {
  if (T < 1) throw ValidationError("sample " + id + ": T must be >= 1");
  if (C < 1 || H < 1 || W < 1) throw ValidationError("sample " + id + ": nonpositive C/H/W");
  if (dates.size() != static_cast<size_t>(T)) {
    throw ValidationError("sample " + id + ": dates length differs from T");
  }
  for (int t = 0; t < T; ++t) {
    if (dates[t] < 1 || dates[t] > 366) {
      throw ValidationError("sample " + id + ": date outside [1, 366]");
    }
    if (t > 0 && dates[t] <= dates[t - 1]) {
      throw ValidationError("sample " + id + ": dates not strictly increasing");
    }
  }
  if (values.size() != static_cast<size_t>(T) * frame_size()) {
    throw ValidationError("sample " + id + ": values size mismatch");
  }
  if (valid.size() != static_cast<size_t>(T) * plane_size()) {
    throw ValidationError("sample " + id + ": valid mask size mismatch");
  }
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < C; ++c) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          if (is_valid(t, y, x) && !std::isfinite(at(t, c, y, x))) {
            throw ValidationError("sample " + id + ": non-finite value at a valid pixel");
          }
        }
      }
    }
  }
}

void LabelMap::validate() const {
  if (K < 1) throw ValidationError("label map: K must be positive");
  if (classes.size() != static_cast<size_t>(H) * W) {
    throw ValidationError("label map: size differs from H*W");
  }
  if (class_names.size() != static_cast<size_t>(K)) {
    throw ValidationError("label map: class_names length differs from K");
  }
  for (uint8_t c : classes) {
    if (c >= K) throw ValidationError("label map: class index >= K");
  }
}

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw FormatError("unknown split '" + name + "'");
}

int Dataset::channels() const { return samples.empty() ? 0 : samples.front().sits.C; }

int Dataset::num_classes() const { return samples.empty() ? 0 : samples.front().labels.K; }

std::vector<std::string> Dataset::class_names() const {
  return samples.empty() ? std::vector<std::string>{} : samples.front().labels.class_names;
}

bool Dataset::uniform_length() const {
  return std::all_of(samples.begin(), samples.end(), [&](const LabeledSample& s) {
    return s.sits.T == samples.front().sits.T;
  });
}

void Dataset::validate() const {
  for (const auto& s : samples) {
    s.sits.validate();
    s.labels.validate();
    if (s.sits.C != channels()) throw ValidationError("dataset: samples disagree on C");
    if (s.labels.K != num_classes()) throw ValidationError("dataset: samples disagree on K");
    if (s.labels.H != s.sits.H || s.labels.W != s.sits.W) {
      throw ValidationError("dataset: label shape differs from sample " + s.sits.id);
    }
  }
  if (!channel_stats.empty() &&
      (channel_stats.mean.size() != static_cast<size_t>(channels()) ||
       channel_stats.std.size() != static_cast<size_t>(channels()))) {
    throw ValidationError("dataset: channel_stats length differs from C");
  }
}

// ---------------------------------------------------------------------------
// Synthetic generator

double Phenology::evaluate(double day, double slope_days) const {
  const double rise = 1.0 / (1.0 + std::exp(-(day - season_start) / slope_days));
  const double fall = 1.0 / (1.0 + std::exp(-(day - season_end) / slope_days));
  return base + amplitude * (rise - fall);
}

void SyntheticSpec::validate() const {
  if (K < 2) throw ValidationError("synthetic spec: K must be >= 2");
  if (K > 255) throw ValidationError("synthetic spec: K must fit in 8-bit labels");
  if (n_samples < 1 || T < 1 || C < 1 || H < 1 || W < 1) {
    throw ValidationError("synthetic spec: dimensions must be positive");
  }
  if (!(noise_std >= 0.0)) throw ValidationError("synthetic spec: noise_std must be >= 0");
  if (!(slope_days > 0.0)) throw ValidationError("synthetic spec: slope_days must be > 0");
  if (date_jitter < 0.0 || amplitude_jitter < 0.0) {
    throw ValidationError("synthetic spec: jitter must be >= 0");
  }
  if (min_field_size < 1 || max_field_size < min_field_size) {
    throw ValidationError("synthetic spec: invalid field size range");
  }
  if (!classes.empty() && classes.size() != static_cast<size_t>(K)) {
    throw ValidationError("synthetic spec: classes must have K entries");
  }
  if (!dates.empty()) {
    if (dates.size() != static_cast<size_t>(T)) {
      throw ValidationError("synthetic spec: dates must have T entries");
    }
    for (size_t i = 0; i < dates.size(); ++i) {
      if (dates[i] < 1 || dates[i] > 366 || (i > 0 && dates[i] <= dates[i - 1])) {
        throw ValidationError("synthetic spec: dates must be strictly increasing in [1, 366]");
      }
    }
  }
}

std::vector<Phenology> default_phenology(int K) {
  std::vector<Phenology> out;
  out.push_back({0.08, 110.0, 290.0, 0.15});
  for (int k = 1; k < K; ++k) {
    const double start = 40.0 + (k - 1) * (200.0 / std::max(1, K - 2));
    out.push_back({0.45, start, start + 120.0, 0.12});
  }
  return out;
}

namespace {

std::vector<int> default_dates(int T) {
  if (T == 12) return mid_month_days();
  std::vector<int> dates(T);
  for (int t = 0; t < T; ++t) {
    dates[t] = 1 + static_cast<int>(std::floor((t + 0.5) * 365.0 / T));
  }
  return dates;
}

struct Rect {
  int y0, x0, h, w;
};

void split_rectangles(const Rect& r, const SyntheticSpec& spec, Rng& rng, std::vector<Rect>& out) {
  const int lo = spec.min_field_size;
  const bool can_split_h = r.h >= 2 * lo;
  const bool can_split_w = r.w >= 2 * lo;
  const bool too_big = r.h > spec.max_field_size || r.w > spec.max_field_size;
  if ((!can_split_h && !can_split_w) || (!too_big && uniform01(rng) < 0.5)) {
    out.push_back(r);
    return;
  }
  const bool split_rows = can_split_h && (!can_split_w || r.h >= r.w);
  const int extent = split_rows ? r.h : r.w;
  const int cut = lo + static_cast<int>(uniform_index(rng, static_cast<uint64_t>(extent - 2 * lo + 1)));
  if (split_rows) {
    split_rectangles({r.y0, r.x0, cut, r.w}, spec, rng, out);
    split_rectangles({r.y0 + cut, r.x0, r.h - cut, r.w}, spec, rng, out);
  } else {
    split_rectangles({r.y0, r.x0, r.h, cut}, spec, rng, out);
    split_rectangles({r.y0, r.x0 + cut, r.h, r.w - cut}, spec, rng, out);
  }
}

// Returns a field index per pixel and the number of fields.
std::pair<std::vector<int>, int> partition_fields(const SyntheticSpec& spec, Rng& rng) {
  std::vector<int> field(static_cast<size_t>(spec.H) * spec.W, 0);
  if (spec.field_geometry == FieldGeometry::kRectangles) {
    std::vector<Rect> rects;
    split_rectangles({0, 0, spec.H, spec.W}, spec, rng, rects);
    for (size_t i = 0; i < rects.size(); ++i) {
      const Rect& r = rects[i];
      for (int y = r.y0; y < r.y0 + r.h; ++y) {
        for (int x = r.x0; x < r.x0 + r.w; ++x) field[static_cast<size_t>(y) * spec.W + x] = static_cast<int>(i);
      }
    }
    return {field, static_cast<int>(rects.size())};
  }
  const double mean_area = 0.5 * (spec.min_field_size + spec.max_field_size);
  const int n = std::max(2, static_cast<int>(std::lround(spec.H * spec.W / (mean_area * mean_area))));
  std::vector<std::pair<double, double>> seeds(n);
  for (auto& s : seeds) s = {uniform(rng, 0.0, spec.H), uniform(rng, 0.0, spec.W)};
  for (int y = 0; y < spec.H; ++y) {
    for (int x = 0; x < spec.W; ++x) {
      int best = 0;
      double best_d = INFINITY;
      for (int i = 0; i < n; ++i) {
        const double dy = y + 0.5 - seeds[i].first;
        const double dx = x + 0.5 - seeds[i].second;
        const double d = dy * dy + dx * dx;
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      field[static_cast<size_t>(y) * spec.W + x] = best;
    }
  }
  return {field, n};
}

// Fixed spectral response: channel c scales the seasonal term by its gain and
// shifts the base by a small offset.
double channel_gain(int c, int C) { return 1.0 - 1.6 * c / std::max(1, C); }
double channel_offset(int c) { return 0.1 * c; }

}  // namespace

Dataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  const auto phenology = spec.classes.empty() ? default_phenology(spec.K) : spec.classes;
  const auto dates = spec.dates.empty() ? default_dates(spec.T) : spec.dates;
  std::vector<std::string> names(spec.K);
  for (int k = 0; k < spec.K; ++k) names[k] = "class_" + std::to_string(k);

  Dataset ds;
  ds.split = Split::kTrain;
  Rng rng(spec.seed);
  for (int n = 0; n < spec.n_samples; ++n) {
    char id[16];
    std::snprintf(id, sizeof(id), "s%05d", n);
    LabeledSample item;
    item.sits = SITSample::zeros(id, spec.T, spec.C, spec.H, spec.W, dates);
    item.labels = LabelMap{spec.H, spec.W, spec.K,
                           std::vector<uint8_t>(static_cast<size_t>(spec.H) * spec.W), names};

    const auto [field, n_fields] = partition_fields(spec, rng);
    std::vector<int> field_class(n_fields);
    std::vector<Phenology> field_curve(n_fields);
    for (int f = 0; f < n_fields; ++f) {
      field_class[f] = static_cast<int>(uniform_index(rng, static_cast<uint64_t>(spec.K)));
      Phenology p = phenology[field_class[f]];
      if (spec.date_jitter > 0.0) {
        const double shift = uniform(rng, -spec.date_jitter, spec.date_jitter);
        p.season_start += shift;
        p.season_end += shift;
      }
      if (spec.amplitude_jitter > 0.0) {
        p.amplitude *= 1.0 + uniform(rng, -spec.amplitude_jitter, spec.amplitude_jitter);
      }
      field_curve[f] = p;
    }

    // Per-field curves evaluated once per (field, t, c).
    std::vector<double> curve(static_cast<size_t>(n_fields) * spec.T * spec.C);
    for (int f = 0; f < n_fields; ++f) {
      for (int t = 0; t < spec.T; ++t) {
        const double season = field_curve[f].evaluate(dates[t], spec.slope_days) - field_curve[f].base;
        for (int c = 0; c < spec.C; ++c) {
          curve[(static_cast<size_t>(f) * spec.T + t) * spec.C + c] =
              field_curve[f].base + channel_offset(c) + channel_gain(c, spec.C) * season;
        }
      }
    }

    for (int y = 0; y < spec.H; ++y) {
      for (int x = 0; x < spec.W; ++x) {
        const int f = field[static_cast<size_t>(y) * spec.W + x];
        item.labels.classes[static_cast<size_t>(y) * spec.W + x] = static_cast<uint8_t>(field_class[f]);
      }
    }
    for (int t = 0; t < spec.T; ++t) {
      for (int c = 0; c < spec.C; ++c) {
        for (int y = 0; y < spec.H; ++y) {
          for (int x = 0; x < spec.W; ++x) {
            const int f = field[static_cast<size_t>(y) * spec.W + x];
            double v = curve[(static_cast<size_t>(f) * spec.T + t) * spec.C + c];
            if (spec.noise_std > 0.0) v += spec.noise_std * standard_normal(rng);
            item.sits.at(t, c, y, x) = static_cast<float>(v);
          }
        }
      }
    }
    ds.samples.push_back(std::move(item));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

void check_id(const std::string& id) {
  if (id.empty() || !std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
      }) || id.front() == '.') {
    throw ValidationError("sample id '" + id + "' is not a safe file name");
  }
}

}  // namespace

fs::path save_dataset(const Dataset& dataset, const fs::path& directory) {
  dataset.validate();
  std::error_code ec;
  fs::create_directories(directory / "samples", ec);
  if (ec) throw IoError("cannot create " + (directory / "samples").string() + ": " + ec.message());

  json manifest;
  manifest["schema"] = 1;
  manifest["format"] = "frp-dataset";
  manifest["split"] = to_string(dataset.split);
  manifest["channels"] = dataset.channels();
  manifest["num_classes"] = dataset.num_classes();
  manifest["class_names"] = dataset.class_names();
  if (dataset.channel_stats.empty()) {
    manifest["channel_stats"] = nullptr;
  } else {
    manifest["channel_stats"] = {{"mean", dataset.channel_stats.mean},
                                 {"std", dataset.channel_stats.std}};
  }
  json samples = json::array();
  for (const auto& s : dataset.samples) {
    check_id(s.sits.id);
    const bool masked = !s.sits.all_valid();
    samples.push_back({{"id", s.sits.id},
                       {"T", s.sits.T},
                       {"H", s.sits.H},
                       {"W", s.sits.W},
                       {"dates", s.sits.dates},
                       {"has_valid_mask", masked}});
    const fs::path base = directory / "samples" / s.sits.id;
    write_f32_file(base.string() + ".values", s.sits.values);
    write_u8_file(base.string() + ".labels", s.labels.classes);
    if (masked) write_u8_file(base.string() + ".valid", s.sits.valid);
  }
  manifest["samples"] = std::move(samples);
  const fs::path manifest_path = directory / "manifest.json";
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

Dataset load_dataset(const fs::path& directory) {
  const fs::path manifest_path = directory / "manifest.json";
  if (!fs::exists(manifest_path)) throw FormatError("missing manifest: " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError("corrupt manifest " + manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    if (manifest.at("schema").get<int>() != 1) throw FormatError("unsupported dataset schema");
    ds.split = split_from_string(manifest.at("split").get<std::string>());
    const int C = manifest.at("channels").get<int>();
    const int K = manifest.at("num_classes").get<int>();
    const auto names = manifest.at("class_names").get<std::vector<std::string>>();
    if (!manifest.at("channel_stats").is_null()) {
      ds.channel_stats.mean = manifest["channel_stats"].at("mean").get<std::vector<double>>();
      ds.channel_stats.std = manifest["channel_stats"].at("std").get<std::vector<double>>();
    }
    for (const auto& entry : manifest.at("samples")) {
      const auto id = entry.at("id").get<std::string>();
      check_id(id);
      const int T = entry.at("T").get<int>();
      const int H = entry.at("H").get<int>();
      const int W = entry.at("W").get<int>();
      const fs::path base = directory / "samples" / id;
      const fs::path values_path = base.string() + ".values";
      const fs::path labels_path = base.string() + ".labels";
      if (!fs::exists(values_path) || !fs::exists(labels_path)) {
        throw FormatError("missing payload for sample '" + id + "'");
      }
      LabeledSample item;
      item.sits = SITSample::zeros(id, T, C, H, W, entry.at("dates").get<std::vector<int>>());
      auto values = read_f32_file(values_path);
      const size_t frame = item.sits.frame_size();
      if (values.size() != static_cast<size_t>(T) * frame) {
        throw FormatError("sample '" + id + "': manifest declares T=" + std::to_string(T) +
                          " but payload holds " + std::to_string(values.size() / frame) +
                          " frames (" + std::to_string(values.size()) + " floats)");
      }
      item.sits.values = std::move(values);
      if (entry.value("has_valid_mask", false)) {
        auto valid = read_u8_file(base.string() + ".valid");
        if (valid.size() != item.sits.valid.size()) {
          throw FormatError("sample '" + id + "': valid mask size mismatch");
        }
        item.sits.valid = std::move(valid);
      }
      auto labels = read_u8_file(labels_path);
      if (labels.size() != static_cast<size_t>(H) * W) {
        throw FormatError("sample '" + id + "': label payload size mismatch");
      }
      item.labels = LabelMap{H, W, K, std::move(labels), names};
      ds.samples.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  try {
    ds.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("dataset content invalid: ") + e.what());
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Normalization

ChannelStats compute_channel_stats(const Dataset& dataset) {
  if (dataset.samples.empty()) throw ValidationError("normalize: empty dataset");
  const int C = dataset.channels();
  std::vector<double> sum(C, 0.0);
  std::vector<size_t> count(C, 0);
  for (const auto& item : dataset.samples) {
    const auto& s = item.sits;
    for (int t = 0; t < s.T; ++t)
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < s.H; ++y)
          for (int x = 0; x < s.W; ++x)
            if (s.is_valid(t, y, x)) {
              sum[c] += s.at(t, c, y, x);
              ++count[c];
            }
  }
  ChannelStats stats;
  stats.mean.resize(C);
  stats.std.resize(C);
  for (int c = 0; c < C; ++c) {
    if (count[c] == 0) throw ValidationError("normalize: channel has no valid pixels");
    stats.mean[c] = sum[c] / static_cast<double>(count[c]);
  }
  std::vector<double> sq(C, 0.0);
  for (const auto& item : dataset.samples) {
    const auto& s = item.sits;
    for (int t = 0; t < s.T; ++t)
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < s.H; ++y)
          for (int x = 0; x < s.W; ++x)
            if (s.is_valid(t, y, x)) {
              const double d = s.at(t, c, y, x) - stats.mean[c];
              sq[c] += d * d;
            }
  }
  for (int c = 0; c < C; ++c) {
    stats.std[c] = std::sqrt(sq[c] / static_cast<double>(count[c]));
    if (stats.std[c] < kStdEpsilon) {
      std::cerr << "[frp] warning: channel " << c << " has zero variance; std clamped to "
                << kStdEpsilon << "\n";
      stats.std[c] = kStdEpsilon;
    }
  }
  return stats;
}

Dataset apply_channel_stats(const Dataset& dataset, const ChannelStats& stats) {
  if (stats.mean.size() != static_cast<size_t>(dataset.channels()) ||
      stats.std.size() != stats.mean.size()) {
    throw ValidationError("channel stats do not match dataset channels");
  }
  Dataset out = dataset;
  out.channel_stats = stats;
  for (auto& item : out.samples) {
    auto& s = item.sits;
    for (int t = 0; t < s.T; ++t)
      for (int c = 0; c < s.C; ++c) {
        const double denom = std::max(stats.std[c], kStdEpsilon);
        float* plane = &s.values[(static_cast<size_t>(t) * s.C + c) * s.plane_size()];
        for (size_t i = 0; i < s.plane_size(); ++i) {
          plane[i] = static_cast<float>((plane[i] - stats.mean[c]) / denom);
        }
      }
  }
  return out;
}

Dataset normalize_channels(const Dataset& dataset) {
  if (!dataset.channel_stats.empty()) {
    throw ValidationError("normalize: dataset is already normalized");
  }
  return apply_channel_stats(dataset, compute_channel_stats(dataset));
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction,
                                          uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("split: train fraction must lie in (0, 1)");
  }
  std::vector<size_t> order(dataset.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  const size_t n_train = static_cast<size_t>(std::llround(train_fraction * order.size()));
  Dataset train, test;
  train.split = Split::kTrain;
  test.split = Split::kTest;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : test).samples.push_back(dataset.samples[order[i]]);
  }
  return {train, test};
}

}  // namespace frp
