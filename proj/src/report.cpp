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

#include "frp/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "frp/common.hpp"

namespace frp {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const ResultRow& r) {
  json f1 = json::object();
  for (size_t k = 0; k < r.metrics.per_class_f1.size(); ++k) {
    const std::string name = k < r.class_names.size() ? r.class_names[k] : std::to_string(k);
    f1[name] = r.metrics.per_class_f1[k];
  }
  std::vector<int> evaluated(r.metrics.class_evaluated.begin(), r.metrics.class_evaluated.end());
  return {{"method", r.method},
          {"backbone", r.backbone},
          {"gap_mode", r.gap_mode},
          {"ratio", r.ratio},
          {"seed", r.seed},
          {"oa", r.metrics.oa},
          {"aa", r.metrics.aa},
          {"kappa", r.metrics.kappa},
          {"miou", r.metrics.miou},
          {"mean_f1", r.metrics.mean_f1},
          {"class_names", r.class_names},
          {"per_class_f1", r.metrics.per_class_f1},
          {"class_evaluated", evaluated},
          {"fingerprint", r.fingerprint}};
}

ResultRow result_row_from_json(const json& j) {
  ResultRow r;
  r.method = j.at("method").get<std::string>();
  r.backbone = j.at("backbone").get<std::string>();
  r.gap_mode = j.at("gap_mode").get<std::string>();
  r.ratio = j.at("ratio").get<double>();
  r.seed = j.at("seed").get<uint64_t>();
  r.metrics.oa = j.at("oa").get<double>();
  r.metrics.aa = j.at("aa").get<double>();
  r.metrics.kappa = j.at("kappa").get<double>();
  r.metrics.miou = j.at("miou").get<double>();
  r.metrics.mean_f1 = j.at("mean_f1").get<double>();
  r.class_names = j.at("class_names").get<std::vector<std::string>>();
  r.metrics.per_class_f1 = j.at("per_class_f1").get<std::vector<double>>();
  for (int e : j.at("class_evaluated").get<std::vector<int>>()) r.metrics.class_evaluated.push_back(e != 0);
  r.fingerprint = j.at("fingerprint").get<std::string>();
  r.metrics.fingerprint = r.fingerprint;
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty list");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double median_mean_f1(const std::vector<ResultRow>& rows, const std::string& method, const std::string& gap_mode,
                      double ratio) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.method == method && r.gap_mode == gap_mode && std::abs(r.ratio - ratio) < 1e-9) {
      v.push_back(r.metrics.mean_f1);
    }
  }
  if (v.empty()) {
    throw ValidationError("no results for method " + method + ", gap mode " + gap_mode + ", ratio " +
                          std::to_string(ratio));
  }
  return median(v);
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_csv(const std::vector<ResultRow>& rows) {
  const auto& names = rows.front().class_names;
  std::ostringstream s;
  s << "method,backbone,gap_mode,ratio,seed,oa,aa,kappa,miou,mean_f1";
  for (const auto& n : names) s << "," << csv_field("f1_" + n);
  s << ",fingerprint\n";
  for (const auto& r : rows) {
    if (r.class_names != names) throw ValidationError("emit_report: rows disagree on class names");
    s << csv_field(r.method) << "," << csv_field(r.backbone) << "," << r.gap_mode << "," << fmt("%.4f", r.ratio)
      << "," << r.seed << "," << fmt("%.6f", r.metrics.oa) << "," << fmt("%.6f", r.metrics.aa) << ","
      << fmt("%.6f", r.metrics.kappa) << "," << fmt("%.6f", r.metrics.miou) << ","
      << fmt("%.6f", r.metrics.mean_f1);
    for (double f : r.metrics.per_class_f1) s << "," << fmt("%.6f", f);
    s << "," << r.fingerprint << "\n";
  }
  return s.str();
}

// Groups keyed by gap mode; methods and ratios in first-seen / sorted order.
struct Grid {
  std::vector<std::string> modes;
  std::map<std::string, std::vector<std::string>> methods;
  std::map<std::string, std::vector<double>> ratios;
};

Grid grid_of(const std::vector<ResultRow>& rows) {
  Grid g;
  for (const auto& r : rows) {
    if (std::find(g.modes.begin(), g.modes.end(), r.gap_mode) == g.modes.end()) g.modes.push_back(r.gap_mode);
    auto& m = g.methods[r.gap_mode];
    if (std::find(m.begin(), m.end(), r.method) == m.end()) m.push_back(r.method);
    auto& q = g.ratios[r.gap_mode];
    if (std::none_of(q.begin(), q.end(), [&](double x) { return std::abs(x - r.ratio) < 1e-9; })) {
      q.push_back(r.ratio);
    }
  }
  for (auto& [k, q] : g.ratios) std::sort(q.begin(), q.end());
  return g;
}

std::vector<double> cell(const std::vector<ResultRow>& rows, const std::string& method, const std::string& mode,
                         double ratio, double MetricsReport::*field) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.method == method && r.gap_mode == mode && std::abs(r.ratio - ratio) < 1e-9) v.push_back(r.metrics.*field);
  }
  return v;
}

std::string render_markdown(const std::vector<ResultRow>& rows) {
  const Grid g = grid_of(rows);
  std::ostringstream s;
  s << "# Results\n\nMedian over seeds, values in percent.\n";
  const std::vector<std::pair<const char*, double MetricsReport::*>> metrics = {
      {"Mean F1", &MetricsReport::mean_f1}, {"OA", &MetricsReport::oa}, {"Kappa", &MetricsReport::kappa},
      {"mIoU", &MetricsReport::miou}};
  for (const auto& mode : g.modes) {
    for (const auto& [title, field] : metrics) {
      s << "\n## " << title << " (gap mode: " << mode << ")\n\n| method |";
      for (double q : g.ratios.at(mode)) s << " " << fmt("%.0f%%", 100.0 * q) << " |";
      s << " seeds |\n|---|";
      for (size_t i = 0; i < g.ratios.at(mode).size(); ++i) s << "---:|";
      s << "---:|\n";
      for (const auto& method : g.methods.at(mode)) {
        s << "| " << method << " |";
        size_t seeds = 0;
        for (double q : g.ratios.at(mode)) {
          const auto v = cell(rows, method, mode, q, field);
          seeds = std::max(seeds, v.size());
          s << " " << (v.empty() ? std::string("-") : fmt("%.2f", 100.0 * median(v))) << " |";
        }
        s << " " << seeds << " |\n";
      }
    }
  }
  return s.str();
}

std::string render_svg(const std::vector<ResultRow>& rows, const Grid& g, const std::string& mode) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double W = 640, H = 400, left = 60, right = 180, top = 30, bottom = 50;
  const auto& ratios = g.ratios.at(mode);
  const double xmax = std::max(ratios.back(), 1e-9);
  double ymin = 1.0, ymax = 0.0;
  std::vector<std::vector<double>> series;
  for (const auto& method : g.methods.at(mode)) {
    std::vector<double> ys;
    for (double q : ratios) {
      const auto v = cell(rows, method, mode, q, &MetricsReport::mean_f1);
      ys.push_back(v.empty() ? NAN : median(v));
      if (!v.empty()) {
        ymin = std::min(ymin, ys.back());
        ymax = std::max(ymax, ys.back());
      }
    }
    series.push_back(ys);
  }
  ymin = std::max(0.0, std::floor(ymin * 20.0 - 1.0) / 20.0);
  ymax = std::min(1.0, std::ceil(ymax * 20.0 + 1.0) / 20.0);
  if (ymax <= ymin) ymax = ymin + 0.05;
  auto px = [&](double x) { return left + (W - left - right) * x / xmax; };
  auto py = [&](double y) { return top + (H - top - bottom) * (1.0 - (y - ymin) / (ymax - ymin)); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"18\">Mean F1 vs. missing ratio (" << mode << ")</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  for (double q : ratios) {
    s << "<text x=\"" << px(q) << "\" y=\"" << H - bottom + 18 << "\" text-anchor=\"middle\">"
      << fmt("%.0f%%", 100.0 * q) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << fmt("%.2f", y)
      << "</text>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << py(y) << "\" x2=\"" << W - right << "\" y2=\"" << py(y)
      << "\" stroke=\"#ddd\"/>\n";
  }
  s << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">missing ratio</text>\n";
  const auto& methods = g.methods.at(mode);
  for (size_t m = 0; m < methods.size(); ++m) {
    const char* color = kColors[m % 10];
    std::string points;
    for (size_t i = 0; i < ratios.size(); ++i) {
      if (std::isnan(series[m][i])) continue;
      points += fmt("%.1f", px(ratios[i])) + "," + fmt("%.1f", py(series[m][i])) + " ";
      s << "<circle cx=\"" << px(ratios[i]) << "\" cy=\"" << py(series[m][i]) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    }
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << points << "\"/>\n";
    const double ly = top + 16.0 * m + 10;
    s << "<line x1=\"" << W - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - right + 36 << "\" y=\"" << ly + 4 << "\">" << methods[m] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

std::vector<fs::path> emit_report(const std::vector<ResultRow>& rows, const fs::path& out_dir,
                                  const ReportFormats& formats) {
  if (rows.empty()) throw ValidationError("emit_report: no results to report");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  if (formats.csv) {
    written.push_back(out_dir / "results.csv");
    write_text_file(written.back(), render_csv(rows));
  }
  if (formats.json) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    written.push_back(out_dir / "results.json");
    write_text_file(written.back(), json{{"schema", 1}, {"results", arr}}.dump(2) + "\n");
  }
  if (formats.markdown) {
    written.push_back(out_dir / "results.md");
    write_text_file(written.back(), render_markdown(rows));
  }
  if (formats.plots) {
    const Grid g = grid_of(rows);
    for (const auto& mode : g.modes) {
      written.push_back(out_dir / ("mean_f1_" + mode + ".svg"));
      write_text_file(written.back(), render_svg(rows, g, mode));
    }
  }
  return written;
}

std::vector<ResultRow> read_results_json(const fs::path& path) {
  try {
    const json j = json::parse(read_text_file(path));
    std::vector<ResultRow> rows;
    for (const auto& r : j.at("results")) rows.push_back(result_row_from_json(r));
    return rows;
  } catch (const json::exception& e) {
    throw FormatError("malformed results file " + path.string() + ": " + e.what());
  }
}

}  // namespace frp
