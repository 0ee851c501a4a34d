// Copyright 2026 The lidarmt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flat typed key-value text: one "section.key = value" per line, '#'
// starts a comment, vector values are whitespace separated.

#pragma once

#include <map>
#include <string>
#include <vector>

namespace lmt::kv {

class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<long long> get_ints(const std::string& key, std::vector<long long> fallback) const;

  // Keys never read through a getter; used to reject typos.
  std::vector<std::string> unused_keys() const;

 private:
  std::map<std::string, std::string> entries_;
  std::string origin_;
  mutable std::map<std::string, bool> touched_;
};

}  // namespace lmt::kv
