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

#ifndef FRP_REPORT_HPP_
#define FRP_REPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "frp/evaluation.hpp"
#include "json.hpp"

namespace frp {

struct ResultRow {
  std::string method;  // display label, e.g. "ours" or "ours[MA+KD]"
  std::string backbone;
  std::string gap_mode;
  double ratio = 0.0;
  uint64_t seed = 0;
  MetricsReport metrics;
  std::vector<std::string> class_names;
  std::string fingerprint;

  bool operator==(const ResultRow&) const = default;
};

nlohmann::json to_json(const ResultRow& row);
ResultRow result_row_from_json(const nlohmann::json& j);

struct ReportFormats {
  bool csv = true;
  bool json = true;
  bool markdown = true;
  bool plots = true;
};

/// CSV columns: method, backbone, gap_mode, ratio, seed, oa, aa, kappa,
/// miou, mean_f1, f1_<class>..., fingerprint.  The markdown summary and the
/// SVG plots use the median over seeds.  Returns the written paths.
std::vector<std::filesystem::path> emit_report(const std::vector<ResultRow>& rows,
                                               const std::filesystem::path& out_dir,
                                               const ReportFormats& formats = {});

/// Reads rows back from a results.json written by emit_report.
std::vector<ResultRow> read_results_json(const std::filesystem::path& path);

double median(std::vector<double> values);

/// Median over seeds of mean F1 for one (method, gap_mode, ratio) cell;
/// throws if no row matches.
double median_mean_f1(const std::vector<ResultRow>& rows, const std::string& method, const std::string& gap_mode,
                      double ratio);

}  // namespace frp

#endif  // FRP_REPORT_HPP_
