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

#pragma once

#include <cstdint>

namespace lmt {

// Integer voxel index: x along the first grid axis (width W), y along the
// second (height H), z along the vertical (depth D).
struct Coord {
  std::int32_t x = 0, y = 0, z = 0;

  bool operator==(const Coord&) const = default;
  auto operator<=>(const Coord&) const = default;
};

struct SpatialShape {
  std::int32_t w = 0, h = 0, d = 0;

  bool operator==(const SpatialShape&) const = default;
  bool contains(const Coord& c) const {
    return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < w && c.y < h && c.z < d;
  }
  std::int64_t volume() const {
    return static_cast<std::int64_t>(w) * h * d;
  }
  // z*H*W + y*W + x
  std::int64_t linear(const Coord& c) const {
    return (static_cast<std::int64_t>(c.z) * h + c.y) * w + c.x;
  }
  std::int32_t bev_cells() const { return w * h; }
};

}  // namespace lmt
