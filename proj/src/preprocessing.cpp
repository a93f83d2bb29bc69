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

#include "frp/preprocessing.hpp"

#include <algorithm>
#include <cmath>

#include "frp/interpolation.hpp"
#include "json.hpp"

namespace frp {

namespace fs = std::filesystem;
using nlohmann::json;

void RasterStack::validate() const {
  if (M < 1) throw ValidationError("raster stack needs at least one acquisition");
  if (C < 1 || H < 1 || W < 1) throw ValidationError("raster stack: nonpositive dimensions");
  if (images.size() != static_cast<size_t>(M) * C * H * W ||
      cloud_masks.size() != static_cast<size_t>(M) * H * W ||
      acquisition_dates.size() != static_cast<size_t>(M)) {
    throw ValidationError("raster stack: inconsistent shapes");
  }
}

double cloud_cover_ratio(std::span<const uint8_t> mask) {
  if (mask.empty()) throw ValidationError("cloud_cover_ratio: empty mask");
  const auto cloudy = std::count_if(mask.begin(), mask.end(), [](uint8_t v) { return v != 0; });
  return static_cast<double>(cloudy) / static_cast<double>(mask.size());
}

Composite monthly_median_composite(const RasterStack& stack) {
  stack.validate();
  const size_t plane = static_cast<size_t>(stack.H) * stack.W;
  Composite out;
  out.values.assign(static_cast<size_t>(stack.C) * plane, 0.0f);
  out.residual_invalid.assign(plane, 0);
  std::vector<float> clear;
  clear.reserve(stack.M);
  for (size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < stack.C; ++c) {
      clear.clear();
      for (int m = 0; m < stack.M; ++m) {
        if (stack.cloud_masks[m * plane + p] == 0) {
          clear.push_back(stack.images[(static_cast<size_t>(m) * stack.C + c) * plane + p]);
        }
      }
      if (clear.empty()) {
        out.residual_invalid[p] = 1;
        continue;
      }
      std::sort(clear.begin(), clear.end());
      const size_t n = clear.size();
      const double median = n % 2 == 1
                                ? clear[n / 2]
                                : 0.5 * (static_cast<double>(clear[n / 2 - 1]) + clear[n / 2]);
      out.values[c * plane + p] = static_cast<float>(median);
    }
  }
  return out;
}

MonthlyAvailability flag_missing_months(std::span<const double> ratios, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("missing threshold must lie in [0, 1]");
  }
  MonthlyAvailability out;
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("cloud ratio must lie in [0, 1]");
    out.cloud_ratio.push_back(r);
    out.available.push_back(r <= threshold);
  }
  return out;
}

SITSample fill_residual_pixels(const SITSample& sits) {
  SITSample out = sits;
  std::vector<int> observed_dates;
  std::vector<int> observed_steps;
  std::vector<double> series;
  for (int y = 0; y < sits.H; ++y) {
    for (int x = 0; x < sits.W; ++x) {
      observed_dates.clear();
      observed_steps.clear();
      for (int t = 0; t < sits.T; ++t) {
        if (sits.is_valid(t, y, x)) {
          observed_dates.push_back(sits.dates[t]);
          observed_steps.push_back(t);
        }
      }
      if (observed_steps.empty()) {
        throw ValidationError("sample " + sits.id + ": pixel (" + std::to_string(y) + ", " +
                              std::to_string(x) + ") is invalid at every time step");
      }
      if (observed_steps.size() == static_cast<size_t>(sits.T)) continue;
      for (int t = 0; t < sits.T; ++t) {
        if (sits.is_valid(t, y, x)) continue;
        const FillRule rule = fill_rule(observed_dates, sits.dates[t], ImputeMethod::kLinear);
        for (int c = 0; c < sits.C; ++c) {
          series.clear();
          for (int s : observed_steps) series.push_back(sits.at(s, c, y, x));
          out.at(t, c, y, x) = static_cast<float>(apply_fill_rule(rule, series));
        }
      }
    }
  }
  std::fill(out.valid.begin(), out.valid.end(), uint8_t{1});
  return out;
}

// ---------------------------------------------------------------------------
// Raster directories

void write_raster_directory(const RasterCollection& rasters, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  json manifest = {{"schema", 1},           {"format", "frp-rasters"},   {"channels", rasters.C},
                   {"height", rasters.H},   {"width", rasters.W},        {"class_names", rasters.class_names}};
  json samples = json::array();
  for (const auto& s : rasters.samples) {
    json acq = json::array();
    for (size_t i = 0; i < s.acquisitions.size(); ++i) {
      const auto& a = s.acquisitions[i];
      const std::string stem = s.id + "_" + std::to_string(i);
      write_f32_file(directory / (stem + ".image"), a.image);
      write_u8_file(directory / (stem + ".cloud"), a.cloud);
      acq.push_back({{"date", a.date}, {"image", stem + ".image"}, {"cloud", stem + ".cloud"}});
    }
    write_u8_file(directory / (s.id + ".labels"), s.labels.classes);
    samples.push_back({{"id", s.id}, {"labels", s.id + ".labels"}, {"acquisitions", acq}});
  }
  manifest["samples"] = std::move(samples);
  write_text_file(directory / "rasters.json", manifest.dump(2) + "\n");
}

RasterCollection read_raster_directory(const fs::path& directory) {
  const fs::path path = directory / "rasters.json";
  if (!fs::exists(path)) throw FormatError("missing raster manifest: " + path.string());
  RasterCollection out;
  try {
    const json manifest = json::parse(read_text_file(path));
    if (manifest.at("schema").get<int>() != 1) throw FormatError("unsupported raster schema");
    out.C = manifest.at("channels").get<int>();
    out.H = manifest.at("height").get<int>();
    out.W = manifest.at("width").get<int>();
    out.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    const size_t plane = static_cast<size_t>(out.H) * out.W;
    for (const auto& entry : manifest.at("samples")) {
      RasterSample s;
      s.id = entry.at("id").get<std::string>();
      s.labels = LabelMap{out.H, out.W, static_cast<int>(out.class_names.size()),
                          read_u8_file(directory / entry.at("labels").get<std::string>()),
                          out.class_names};
      if (s.labels.classes.size() != plane) {
        throw FormatError("sample '" + s.id + "': label payload size mismatch");
      }
      for (const auto& a : entry.at("acquisitions")) {
        RasterAcquisition acq;
        acq.date = a.at("date").get<int>();
        acq.image = read_f32_file(directory / a.at("image").get<std::string>());
        acq.cloud = read_u8_file(directory / a.at("cloud").get<std::string>());
        if (acq.image.size() != out.C * plane || acq.cloud.size() != plane) {
          throw FormatError("sample '" + s.id + "': acquisition payload size mismatch");
        }
        s.acquisitions.push_back(std::move(acq));
      }
      out.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed raster manifest: " + std::string(e.what()));
  }
  return out;
}

RasterCollection simulate_cloudy_acquisitions(const Dataset& complete, int per_month,
                                              double max_cover, uint64_t seed) {
  if (per_month < 1) throw ValidationError("per_month must be >= 1");
  if (!(max_cover >= 0.0 && max_cover <= 1.0)) throw ValidationError("max_cover must lie in [0, 1]");
  RasterCollection out;
  if (complete.samples.empty()) return out;
  const auto& first = complete.samples.front().sits;
  out.C = first.C;
  out.H = first.H;
  out.W = first.W;
  out.class_names = complete.class_names();
  Rng rng(seed);
  for (const auto& item : complete.samples) {
    const auto& s = item.sits;
    RasterSample rs;
    rs.id = s.id;
    rs.labels = item.labels;
    for (int t = 0; t < s.T; ++t) {
      for (int a = 0; a < per_month; ++a) {
        RasterAcquisition acq;
        const int offset = static_cast<int>(uniform_index(rng, 15)) - 7;
        acq.date = std::clamp(s.dates[t] + offset, 1, 365);
        acq.image.assign(s.values.begin() + t * s.frame_size(), s.values.begin() + (t + 1) * s.frame_size());
        acq.cloud.assign(s.plane_size(), 0);
        const double cover = uniform(rng, 0.0, max_cover);
        const int ch = std::clamp(static_cast<int>(std::lround(std::sqrt(cover) * s.H)), 0, s.H);
        const int cw = std::clamp(static_cast<int>(std::lround(std::sqrt(cover) * s.W)), 0, s.W);
        const int y0 = static_cast<int>(uniform_index(rng, static_cast<uint64_t>(s.H - ch + 1)));
        const int x0 = static_cast<int>(uniform_index(rng, static_cast<uint64_t>(s.W - cw + 1)));
        for (int y = y0; y < y0 + ch; ++y) {
          for (int x = x0; x < x0 + cw; ++x) {
            acq.cloud[static_cast<size_t>(y) * s.W + x] = 1;
            for (int c = 0; c < s.C; ++c) acq.image[(static_cast<size_t>(c) * s.H + y) * s.W + x] += 1.5f;
          }
        }
        rs.acquisitions.push_back(std::move(acq));
      }
    }
    out.samples.push_back(std::move(rs));
  }
  return out;
}

PreprocessResult preprocess_rasters(const RasterCollection& rasters, const PreprocessOptions& options) {
  if (!(options.clean_threshold >= 0.0 && options.clean_threshold <= 1.0)) {
    throw ValidationError("clean threshold must lie in [0, 1]");
  }
  const auto mid = mid_month_days();
  const size_t plane = static_cast<size_t>(rasters.H) * rasters.W;
  PreprocessResult result;
  result.dataset.split = Split::kTrain;
  for (const auto& rs : rasters.samples) {
    std::vector<double> ratios(12, 1.0);
    std::vector<Composite> composites(12);
    for (int m = 0; m < 12; ++m) {
      RasterStack stack;
      stack.C = rasters.C;
      stack.H = rasters.H;
      stack.W = rasters.W;
      for (const auto& a : rs.acquisitions) {
        if (month_of_day(a.date) != m) continue;
        ++stack.M;
        stack.images.insert(stack.images.end(), a.image.begin(), a.image.end());
        stack.cloud_masks.insert(stack.cloud_masks.end(), a.cloud.begin(), a.cloud.end());
        stack.acquisition_dates.push_back(a.date);
      }
      if (stack.M == 0) continue;  // no acquisition: fully missing month
      composites[m] = monthly_median_composite(stack);
      ratios[m] = cloud_cover_ratio(composites[m].residual_invalid);
    }
    SampleAvailability avail;
    avail.id = rs.id;
    avail.months = flag_missing_months(ratios, options.missing_threshold);
    avail.complete = std::all_of(ratios.begin(), ratios.end(),
                                 [&](double r) { return r < options.clean_threshold; });
    std::vector<int> months;
    for (int m = 0; m < 12; ++m) {
      if (avail.months.available[m]) months.push_back(m);
    }
    if (months.empty()) {
      throw ValidationError("sample " + rs.id + ": no month passes the missing threshold");
    }
    std::vector<int> dates;
    for (int m : months) dates.push_back(mid[m]);
    SITSample sits = SITSample::zeros(rs.id, static_cast<int>(months.size()), rasters.C, rasters.H,
                                      rasters.W, dates);
    for (size_t i = 0; i < months.size(); ++i) {
      const auto& comp = composites[months[i]];
      std::copy(comp.values.begin(), comp.values.end(), sits.values.begin() + i * sits.frame_size());
      for (size_t p = 0; p < plane; ++p) sits.valid[i * plane + p] = comp.residual_invalid[p] ? 0 : 1;
    }
    result.dataset.samples.push_back({fill_residual_pixels(sits), rs.labels});
    result.availability.push_back(std::move(avail));
  }
  return result;
}

}  // namespace frp
