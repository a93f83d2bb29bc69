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

#ifndef FRP_COMMON_HPP_
#define FRP_COMMON_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace frp {

/// Raised when an argument or configuration violates a documented constraint.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an on-disk artifact is missing, truncated or inconsistent.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All stochastic code draws from a std::mt19937_64 stream owned by the caller.
// The helpers below map raw 64-bit output to values without going through the
// implementation-defined std:: distributions, so draws are identical across
// standard libraries.
using Rng = std::mt19937_64;

/// Uniform double on [0, 1) using the top 53 bits of one draw.
double uniform01(Rng& rng);

/// Uniform double on [lo, hi].  Returns lo when lo == hi.
double uniform(Rng& rng, double lo, double hi);

/// Uniform integer on [0, n) by rejection sampling; n must be > 0.
uint64_t uniform_index(Rng& rng, uint64_t n);

/// Standard normal via Box-Muller (one value per call, two draws consumed).
double standard_normal(Rng& rng);

/// SplitMix64 finalizer, used to derive independent sub-seeds.
uint64_t mix_seed(uint64_t seed, uint64_t salt);

std::string rng_state(const Rng& rng);
Rng rng_from_state(const std::string& state);

/// 64-bit FNV-1a hash rendered as 16 lowercase hex digits.
std::string fingerprint(std::string_view text);

// Little-endian binary payload helpers.  The host is checked at startup to be
// little-endian; payload files are raw arrays with no header.
void write_f32_file(const std::filesystem::path& path, std::span<const float> data);
std::vector<float> read_f32_file(const std::filesystem::path& path);
void write_u8_file(const std::filesystem::path& path, std::span<const uint8_t> data);
std::vector<uint8_t> read_u8_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Day-of-year (1..366) to zero-based month, non-leap calendar with day 366
/// folded into December.
int month_of_day(int day_of_year);

/// Mid-month day-of-year for each of the 12 months: 15, 46, 74, ..., 349.
std::vector<int> mid_month_days();

}  // namespace frp

#endif  // FRP_COMMON_HPP_
