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

#include "lidarmt/checkpoint.hpp"

#include "lidarmt/binio.hpp"
#include "lidarmt/error.hpp"

namespace lmt::ckpt {
namespace {

constexpr char kMagic[8] = {'L', 'M', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint8_t kDtypeF64 = 1;

void put_group(io::ByteWriter& w, const TensorMap& m) {
  w.u32(static_cast<std::uint32_t>(m.size()));
  for (const auto& [name, t] : m) {
    w.str(name);
    w.u8(kDtypeF64);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    for (ag::Index i = 0; i < t.size(); ++i) w.f64(t.data()[i]);
  }
}

TensorMap get_group(io::ByteReader& r) {
  TensorMap m;
  const std::uint32_t n = r.u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    std::string name = r.str();
    const std::uint8_t dtype = r.u8();
    require(dtype == kDtypeF64, ErrorCode::kFormat,
            "tensor '" + name + "': unsupported dtype " + std::to_string(dtype));
    const std::uint32_t rows = r.u32(), cols = r.u32();
    require(static_cast<std::uint64_t>(rows) * cols * 8 <= r.remaining(), ErrorCode::kFormat,
            "tensor '" + name + "': truncated payload");
    ag::Mat t(rows, cols);
    for (ag::Index i = 0; i < t.size(); ++i) t.data()[i] = r.f64();
    require(m.emplace(std::move(name), std::move(t)).second, ErrorCode::kFormat,
            "duplicate tensor name in checkpoint");
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode(const Checkpoint& c) {
  io::ByteWriter w;
  w.raw(std::string_view(kMagic, sizeof kMagic));
  w.u32(kCheckpointVersion);
  w.str(c.config_text);
  w.u64(c.config_hash);
  w.u64(c.step);
  put_group(w, c.params);
  put_group(w, c.adam_m);
  put_group(w, c.adam_v);
  return w.data();
}

Checkpoint decode(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader r(bytes.data(), bytes.size());
  require(bytes.size() >= sizeof kMagic && r.raw(sizeof kMagic) == std::string(kMagic, sizeof kMagic),
          ErrorCode::kVersionMismatch, "not a checkpoint file (bad magic header)");
  const std::uint32_t version = r.u32();
  require(version == kCheckpointVersion, ErrorCode::kVersionMismatch,
          "checkpoint version " + std::to_string(version) + " unsupported (expected " +
              std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.config_text = r.str();
  c.config_hash = r.u64();
  c.step = r.u64();
  c.params = get_group(r);
  c.adam_m = get_group(r);
  c.adam_v = get_group(r);
  require(r.remaining() == 0, ErrorCode::kFormat, "trailing bytes after checkpoint");
  return c;
}

void save(const Checkpoint& c, const std::string& path) { io::write_file(path, encode(c)); }

Checkpoint load(const std::string& path) { return decode(io::read_file(path)); }

}  // namespace lmt::ckpt
