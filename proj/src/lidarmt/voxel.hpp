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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lidarmt/coord.hpp"
#include "lidarmt/data.hpp"
#include "lidarmt/error.hpp"
#include "lidarmt/nn.hpp"

namespace lmt::voxel {

struct VoxelGridSpec {
  std::array<double, 3> voxel_size{0.5, 0.5, 0.5};
  std::array<double, 3> range_min{0.0, 0.0, 0.0};
  std::array<double, 3> range_max{16.0, 16.0, 4.0};

  // ceil(range / size) per axis, exact for ranges that are integer
  // multiples of the voxel size.
  SpatialShape dims() const;
  void validate() const;
  std::array<double, 3> voxel_center(const Coord& c) const;
};

// floor((p - range_min) / size) per axis; nullopt outside [range_min, range_max).
std::optional<Coord> compute_voxel_index(double x, double y, double z, const VoxelGridSpec& spec);

struct VoxelizedFrame {
  SpatialShape shape;
  // Sorted by linear index, unique.
  std::vector<Coord> unique_indices;
  // Row into unique_indices per input point, -1 for dropped points.
  std::vector<int> point_to_voxel;
  // Majority label per voxel (lowest id wins ties). Empty when no labels
  // were supplied.
  std::vector<std::int32_t> voxel_labels;
  std::vector<std::vector<int>> voxel_points;
  std::size_t dropped = 0;

  std::size_t num_voxels() const { return unique_indices.size(); }
};

// Groups points into voxels and, when labels is non-empty, assigns each
// voxel its most frequent label.
VoxelizedFrame group_and_vote(std::span<const data::Point> points,
                              std::span<const std::int32_t> labels, const VoxelGridSpec& spec);

inline constexpr int kPointFeatures = 11;  // xyz, intensity, time, voxel center, offset

// Per-point encoder input for every kept point, in point order.
ag::Mat point_features(const VoxelizedFrame& frame, std::span<const data::Point> points,
                       const VoxelGridSpec& spec);

struct VfeParams {
  std::vector<nn::Linear> layers;
  std::vector<nn::LayerNorm> norms;

  ag::Index out_channels() const { return layers.back().out_features(); }
};

VfeParams make_vfe(nn::ParamStore& store, Rng& rng, const std::string& prefix,
                   const std::vector<int>& widths);

// Shared point MLP followed by a per-voxel elementwise max.
ag::Var voxel_feature_encode(const VoxelizedFrame& frame, std::span<const data::Point> points,
                             const VoxelGridSpec& spec, const VfeParams& params);
// Same, starting from precomputed point features (rows of kept points).
ag::Var voxel_feature_encode(const VoxelizedFrame& frame, const ag::Var& point_rows,
                             const VfeParams& params);

// Broadcasts per-voxel values to points; points with a negative mapping get
// fill. A mapping past the last voxel is an error.
template <typename T>
std::vector<T> devoxelize(std::span<const T> voxel_values, std::span<const int> point_to_voxel,
                          T fill) {
  std::vector<T> out;
  out.reserve(point_to_voxel.size());
  for (int v : point_to_voxel) {
    require(v < static_cast<int>(voxel_values.size()), ErrorCode::kOutOfRange,
            "devoxelize: point maps to voxel row " + std::to_string(v) + " but only " +
                std::to_string(voxel_values.size()) + " voxels exist");
    out.push_back(v < 0 ? fill : voxel_values[static_cast<std::size_t>(v)]);
  }
  return out;
}

}  // namespace lmt::voxel
