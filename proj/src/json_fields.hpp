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

#ifndef FRP_SRC_JSON_FIELDS_HPP_
#define FRP_SRC_JSON_FIELDS_HPP_

#include <cstdint>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include "frp/common.hpp"
#include "json.hpp"

namespace frp::detail {

// Typed lookups that report the full path of a bad field.
class Fields {
 public:
  Fields(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ValidationError(where("") + "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : obj_.items()) {
      if (!ok.count(k)) throw ValidationError(where(k) + "unknown field");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  double number(const char* key, double def) const {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_number()) throw ValidationError(where(key) + "expected a number");
    return v.get<double>();
  }

  int integer(const char* key, int def) const {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_number_integer()) throw ValidationError(where(key) + "expected an integer");
    return v.get<int>();
  }

  uint64_t unsigned_integer(const char* key, uint64_t def) const {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_number_unsigned()) throw ValidationError(where(key) + "expected a nonnegative integer");
    return v.get<uint64_t>();
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) throw ValidationError(where(key) + "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& def) const {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw ValidationError(where(key) + "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key) const {
    if (!has(key)) return {};
    const auto& v = obj_.at(key);
    if (!v.is_array()) throw ValidationError(where(key) + "expected an array");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ValidationError(where(key) + "expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<int> integers(const char* key, std::vector<int> def) const {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_array()) throw ValidationError(where(key) + "expected an array");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ValidationError(where(key) + "expected integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  const nlohmann::json& raw(const char* key) const { return obj_.at(key); }
  const std::string& path() const { return path_; }
  /// "a.b.key: " prefix for error messages.
  std::string path_of(const std::string& key) const { return where(key); }

  Fields child(const char* key) const { return Fields(obj_.at(key), path_.empty() ? key : path_ + "." + key); }

 private:
  std::string where(const std::string& key) const {
    std::string p = path_;
    if (!key.empty()) p = p.empty() ? key : p + "." + key;
    return p.empty() ? std::string("config: ") : p + ": ";
  }

  const nlohmann::json& obj_;
  std::string path_;
};

}  // namespace frp::detail

#endif  // FRP_SRC_JSON_FIELDS_HPP_
