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

// Checkpoint container: 8-byte magic, u32 version, config text, config
// hash, step counter, then three tensor groups (parameters, first and
// second optimizer moments). Each tensor record is name, dtype byte,
// rows, cols and little-endian payload.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lidarmt/autograd.hpp"

namespace lmt::ckpt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using TensorMap = std::map<std::string, ag::Mat>;

struct Checkpoint {
  std::string config_text;
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
  TensorMap params;
  TensorMap adam_m;
  TensorMap adam_v;
};

std::vector<std::uint8_t> encode(const Checkpoint& c);
Checkpoint decode(const std::vector<std::uint8_t>& bytes);
void save(const Checkpoint& c, const std::string& path);
Checkpoint load(const std::string& path);

}  // namespace lmt::ckpt
