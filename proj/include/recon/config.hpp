// Copyright 2026 The ReCon Toolkit Authors
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
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "recon/common.hpp"

namespace recon {

// Flat `key = value` configuration. Blank lines and `#` comments are
// ignored; later assignments override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<stream>") {
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(origin + ":" + std::to_string(line_no) + ": expected key=value");
      }
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error(origin + ":" + std::to_string(line_no) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open '" + path + "'");
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    double out = 0;
    if (!parse_double(*v, out)) throw Error("config: '" + key + "' is not a number: " + *v);
    return out;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    if (!parse_int64(*v, out)) throw Error("config: '" + key + "' is not an integer: " + *v);
    return out;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true" || *v == "yes") return true;
    if (*v == "0" || *v == "false" || *v == "no") return false;
    throw Error("config: '" + key + "' is not a boolean: " + *v);
  }

  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    for (auto& f : split_fields(*v, ',')) {
      if (!f.empty()) out.push_back(f);
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& f : get_list(key, {})) {
      double x = 0;
      if (!parse_double(f, x)) throw Error("config: '" + key + "' has non-number " + f);
      out.push_back(x);
    }
    return out;
  }

  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<std::int64_t> out;
    for (const auto& f : get_list(key, {})) {
      std::int64_t x = 0;
      if (!parse_int64(f, x)) throw Error("config: '" + key + "' has non-integer " + f);
      out.push_back(x);
    }
    return out;
  }

  // Canonical `key=value\n` rendering, sorted by key.
  std::string to_string() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace recon
