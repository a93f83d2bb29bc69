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


#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "frp/report.hpp"
#include "test_util.hpp"

using namespace frp;

namespace {

std::vector<ResultRow> sample_rows() {
  std::vector<ResultRow> rows;
  for (const char* method : {"baseline", "ours[MA+KD]"})
    for (double ratio : {0.0, 0.5})
      for (uint64_t seed : {0, 1, 2}) {
        ResultRow r;
        r.method = method;
        r.backbone = "tiny_tae";
        r.gap_mode = "random";
        r.ratio = ratio;
        r.seed = seed;
        r.metrics.oa = 0.9 - ratio * 0.2 + 0.01 * seed;
        r.metrics.aa = 0.8;
        r.metrics.kappa = 0.7;
        r.metrics.miou = 0.6;
        r.metrics.mean_f1 = 0.5 + 0.1 * seed - ratio * 0.1;
        r.metrics.per_class_f1 = {0.25, 1.0 / 3.0};
        r.metrics.class_evaluated = {true, true};
        r.class_names = {"a", "b"};
        r.fingerprint = "00ff";
        r.metrics.fingerprint = r.fingerprint;
        rows.push_back(r);
      }
  return rows;
}

}  // namespace

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("median mean F1 picks the cell") {
  const auto rows = sample_rows();
  CHECK(median_mean_f1(rows, "baseline", "random", 0.0) == doctest::Approx(0.6));
  CHECK(median_mean_f1(rows, "baseline", "random", 0.5) == doctest::Approx(0.55));
  CHECK_THROWS(median_mean_f1(rows, "nobody", "random", 0.0));
}

TEST_CASE("CSV layout") {
  const auto dir = testutil::temp_dir("report_csv");
  emit_report(sample_rows(), dir);
  std::istringstream in(read_text_file(dir / "results.csv"));
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "method,backbone,gap_mode,ratio,seed,oa,aa,kappa,miou,mean_f1,f1_a,f1_b,fingerprint");
  CHECK(first == "baseline,tiny_tae,random,0.0000,0,0.900000,0.800000,0.700000,0.600000,0.500000,0.250000,0.333333,00ff");
  CHECK(std::filesystem::exists(dir / "results.md"));
  CHECK(std::filesystem::exists(dir / "mean_f1_random.svg"));
}

TEST_CASE("report output is byte-identical across runs") {
  const auto a = testutil::temp_dir("report_a"), b = testutil::temp_dir("report_b");
  const auto pa = emit_report(sample_rows(), a);
  const auto pb = emit_report(sample_rows(), b);
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].filename() == pb[i].filename());
    CHECK(read_text_file(pa[i]) == read_text_file(pb[i]));
  }
}

TEST_CASE("JSON rows round-trip") {
  const auto dir = testutil::temp_dir("report_json");
  const auto rows = sample_rows();
  emit_report(rows, dir);
  CHECK(read_results_json(dir / "results.json") == rows);
  CHECK(result_row_from_json(to_json(rows[3])) == rows[3]);
}

TEST_CASE("markdown summary shows medians in percent") {
  const auto dir = testutil::temp_dir("report_md");
  emit_report(sample_rows(), dir);
  const std::string md = read_text_file(dir / "results.md");
  // baseline at 0%: median mean F1 0.6
  CHECK(md.find("60.00") != std::string::npos);
  CHECK(md.find("ours[MA+KD]") != std::string::npos);
}
