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

#include "frp/common.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace frp {

static_assert(std::endian::native == std::endian::little,
              "payload I/O assumes a little-endian host");

namespace {

constexpr int kMonthStart[12] = {1, 32, 60, 91, 121, 152, 182, 213, 244, 274, 305, 335};

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path, const char* data, size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data, static_cast<std::streamsize>(size));
  if (!out) throw IoError("short write on " + path.string());
}

}  // namespace

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return lo + (hi - lo) * uniform01(rng);
}

uint64_t uniform_index(Rng& rng, uint64_t n) {
  if (n == 0) throw ValidationError("uniform_index: empty range");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_state(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng;
  if (!is) throw FormatError("corrupt rng state");
  return rng;
}

std::string fingerprint(std::string_view text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* kHex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

void write_f32_file(const std::filesystem::path& path, std::span<const float> data) {
  write_bytes(path, reinterpret_cast<const char*>(data.data()), data.size_bytes());
}

std::vector<float> read_f32_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % sizeof(float) != 0) {
    throw FormatError(path.string() + ": size is not a multiple of 4 bytes");
  }
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

void write_u8_file(const std::filesystem::path& path, std::span<const uint8_t> data) {
  write_bytes(path, reinterpret_cast<const char*>(data.data()), data.size());
}

std::vector<uint8_t> read_u8_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return std::vector<uint8_t>(bytes.begin(), bytes.end());
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_bytes(path, text.data(), text.size());
}

int month_of_day(int day_of_year) {
  if (day_of_year < 1 || day_of_year > 366) {
    throw ValidationError("day of year out of range: " + std::to_string(day_of_year));
  }
  int m = 11;
  while (m > 0 && day_of_year < kMonthStart[m]) --m;
  return m;
}

std::vector<int> mid_month_days() {
  std::vector<int> days(12);
  for (int m = 0; m < 12; ++m) days[m] = kMonthStart[m] + 14;
  return days;
}

}  // namespace frp
