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

#include "frp/interpolation.hpp"

#include <algorithm>

namespace frp {

std::string to_string(ImputeMethod method) {
  switch (method) {
    case ImputeMethod::kLinear: return "linear-in";
    case ImputeMethod::kClosest: return "closest-in";
    case ImputeMethod::kLast: return "last-in";
  }
  return "?";
}

ImputeMethod impute_method_from_string(const std::string& name) {
  if (name == "linear-in" || name == "linear") return ImputeMethod::kLinear;
  if (name == "closest-in" || name == "closest") return ImputeMethod::kClosest;
  if (name == "last-in" || name == "last") return ImputeMethod::kLast;
  throw ValidationError("unknown imputation method '" + name + "'");
}

FillRule fill_rule(std::span<const int> observed_dates, int date, ImputeMethod method) {
  if (observed_dates.empty()) throw ValidationError("imputation needs at least one observation");
  // First observation strictly after `date`.
  const auto it = std::upper_bound(observed_dates.begin(), observed_dates.end(), date);
  const int next = it == observed_dates.end() ? -1 : static_cast<int>(it - observed_dates.begin());
  int prev = static_cast<int>(it - observed_dates.begin()) - 1;
  if (prev >= 0 && observed_dates[prev] == date) return {prev, -1, 0.0};

  FillRule rule;
  switch (method) {
    case ImputeMethod::kLinear:
      if (prev >= 0 && next >= 0) {
        rule.prev = prev;
        rule.next = next;
        rule.weight = static_cast<double>(date - observed_dates[prev]) /
                      static_cast<double>(observed_dates[next] - observed_dates[prev]);
      } else {
        rule.prev = prev >= 0 ? prev : next;
      }
      break;
    case ImputeMethod::kClosest:
      if (prev >= 0 && next >= 0) {
        const int before = date - observed_dates[prev];
        const int after = observed_dates[next] - date;
        rule.prev = before <= after ? prev : next;
      } else {
        rule.prev = prev >= 0 ? prev : next;
      }
      break;
    case ImputeMethod::kLast:
      rule.prev = prev >= 0 ? prev : next;
      break;
  }
  return rule;
}

double apply_fill_rule(const FillRule& rule, std::span<const double> observed_values) {
  if (rule.next < 0) return observed_values[rule.prev];
  return (1.0 - rule.weight) * observed_values[rule.prev] + rule.weight * observed_values[rule.next];
}

SITSample impute(const SITSample& masked, const GapPattern& gaps, std::span<const int> full_dates,
                 ImputeMethod method) {
  if (gaps.kept.empty()) throw ValidationError("impute: gap pattern keeps no time step");
  const int T = static_cast<int>(full_dates.size());
  gaps.validate(T);
  if (static_cast<int>(gaps.kept.size()) != masked.T) {
    throw ValidationError("impute: gap pattern size differs from masked sample length");
  }
  for (int t = 1; t < T; ++t) {
    if (full_dates[t] <= full_dates[t - 1]) {
      throw ValidationError("impute: full dates must be strictly increasing");
    }
  }
  for (int i = 0; i < masked.T; ++i) {
    if (full_dates[gaps.kept[i]] != masked.dates[i]) {
      throw ValidationError("impute: masked dates are not the kept subset of full dates");
    }
  }

  SITSample out = SITSample::zeros(masked.id, T, masked.C, masked.H, masked.W,
                                   std::vector<int>(full_dates.begin(), full_dates.end()));
  const size_t frame = masked.frame_size();
  const size_t plane = masked.plane_size();
  std::vector<bool> observed(T, false);
  for (int i = 0; i < masked.T; ++i) {
    observed[gaps.kept[i]] = true;
    std::copy_n(masked.values.begin() + i * frame, frame, out.values.begin() + gaps.kept[i] * frame);
    std::copy_n(masked.valid.begin() + i * plane, plane, out.valid.begin() + gaps.kept[i] * plane);
  }
  for (int t = 0; t < T; ++t) {
    if (observed[t]) continue;
    const FillRule rule = fill_rule(masked.dates, full_dates[t], method);
    float* dst = &out.values[t * frame];
    const float* a = &masked.values[rule.prev * frame];
    if (rule.next < 0) {
      std::copy_n(a, frame, dst);
    } else {
      const float* b = &masked.values[rule.next * frame];
      for (size_t i = 0; i < frame; ++i) {
        dst[i] = static_cast<float>((1.0 - rule.weight) * a[i] + rule.weight * static_cast<double>(b[i]));
      }
    }
  }
  return out;
}

}  // namespace frp
