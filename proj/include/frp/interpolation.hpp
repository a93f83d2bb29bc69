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

#ifndef FRP_INTERPOLATION_HPP_
#define FRP_INTERPOLATION_HPP_

#include <span>
#include <string>
#include <vector>

#include "frp/gap_simulation.hpp"
#include "frp/sits_data.hpp"

namespace frp {

enum class ImputeMethod { kLinear, kClosest, kLast };

/// "linear-in", "closest-in", "last-in".
std::string to_string(ImputeMethod method);
ImputeMethod impute_method_from_string(const std::string& name);

/// For one missing date, which observed neighbours contribute and how.
/// `prev`/`next` index into the observed list (-1 when absent); the filled
/// value is (1 - weight) * obs[prev] + weight * obs[next], or the single
/// available neighbour.
struct FillRule {
  int prev = -1;
  int next = -1;
  double weight = 0.0;
};

/// Resolves the fill rule for `date` given the sorted observed dates.
/// Linear: interpolate in day-of-year, constant extension at the ends.
/// Closest: date-nearest observation, ties to the earlier date.
/// Last: latest earlier observation, the next one for leading gaps.
FillRule fill_rule(std::span<const int> observed_dates, int date, ImputeMethod method);

double apply_fill_rule(const FillRule& rule, std::span<const double> observed_values);

/// Rebuilds a sample on `full_dates` from its masked view.  Kept frames are
/// copied bitwise; every other step is filled per pixel and channel.
SITSample impute(const SITSample& masked, const GapPattern& gaps, std::span<const int> full_dates,
                 ImputeMethod method);

}  // namespace frp

#endif  // FRP_INTERPOLATION_HPP_
