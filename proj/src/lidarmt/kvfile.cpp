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

#include "lidarmt/kvfile.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lidarmt/binio.hpp"
#include "lidarmt/error.hpp"

namespace lmt::kv {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

double to_double(const std::string& key, const std::string& tok) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(ec == std::errc() && p == tok.data() + tok.size(), ErrorCode::kConfig,
          "key '" + key + "': expected a number, got '" + tok + "'");
  return v;
}

long long to_int(const std::string& key, const std::string& tok) {
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(ec == std::errc() && p == tok.data() + tok.size(), ErrorCode::kConfig,
          "key '" + key + "': expected an integer, got '" + tok + "'");
  return v;
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile f;
  f.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kConfig,
            origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorCode::kConfig,
            origin + ":" + std::to_string(lineno) + ": empty key");
    require(!f.has(key), ErrorCode::kConfig,
            origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    f.entries_[key] = trim(line.substr(eq + 1));
  }
  return f;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  const auto bytes = io::read_file(path);
  return parse(std::string(bytes.begin(), bytes.end()), path);
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  touched_[key] = true;
  return it->second;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  touched_[key] = true;
  return to_double(key, it->second);
}

long long KeyValueFile::get_int(const std::string& key, long long fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  touched_[key] = true;
  return to_int(key, it->second);
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  touched_[key] = true;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  fail(ErrorCode::kConfig, "key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> KeyValueFile::get_doubles(const std::string& key,
                                              std::vector<double> fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  touched_[key] = true;
  std::vector<double> out;
  for (const auto& tok : split_ws(it->second)) out.push_back(to_double(key, tok));
  return out;
}

std::vector<long long> KeyValueFile::get_ints(const std::string& key,
                                              std::vector<long long> fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  touched_[key] = true;
  std::vector<long long> out;
  for (const auto& tok : split_ws(it->second)) out.push_back(to_int(key, tok));
  return out;
}

std::vector<std::string> KeyValueFile::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_)
    if (!touched_.count(k)) out.push_back(k);
  return out;
}

}  // namespace lmt::kv

namespace lmt::io {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write to '" + path + "' failed");
}

}  // namespace lmt::io
