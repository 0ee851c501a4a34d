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

#include "lidarmt/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace lmt::voxel {

SpatialShape VoxelGridSpec::dims() const {
  std::array<std::int32_t, 3> n{};
  for (std::size_t a = 0; a < 3; ++a) {
    const double cells = (range_max[a] - range_min[a]) / voxel_size[a];
    const double nearest = std::round(cells);
    n[a] = static_cast<std::int32_t>(std::abs(cells - nearest) < 1e-9 * std::max(1.0, nearest)
                                         ? nearest
                                         : std::ceil(cells));
  }
  return {n[0], n[1], n[2]};
}

void VoxelGridSpec::validate() const {
  for (std::size_t a = 0; a < 3; ++a) {
    require(voxel_size[a] > 0, ErrorCode::kConfig, "voxel size must be positive");
    require(range_max[a] > range_min[a], ErrorCode::kConfig, "grid range must be positive");
  }
}

std::array<double, 3> VoxelGridSpec::voxel_center(const Coord& c) const {
  return {range_min[0] + (c.x + 0.5) * voxel_size[0], range_min[1] + (c.y + 0.5) * voxel_size[1],
          range_min[2] + (c.z + 0.5) * voxel_size[2]};
}

std::optional<Coord> compute_voxel_index(double x, double y, double z, const VoxelGridSpec& spec) {
  const std::array<double, 3> p{x, y, z};
  std::array<std::int32_t, 3> idx{};
  const SpatialShape shape = spec.dims();
  const std::array<std::int32_t, 3> dims{shape.w, shape.h, shape.d};
  for (std::size_t a = 0; a < 3; ++a) {
    if (!std::isfinite(p[a]) || p[a] < spec.range_min[a] || p[a] >= spec.range_max[a])
      return std::nullopt;
    const double cell = std::floor((p[a] - spec.range_min[a]) / spec.voxel_size[a]);
    if (cell < 0 || cell >= dims[a]) return std::nullopt;
    idx[a] = static_cast<std::int32_t>(cell);
  }
  return Coord{idx[0], idx[1], idx[2]};
}

VoxelizedFrame group_and_vote(std::span<const data::Point> points,
                              std::span<const std::int32_t> labels, const VoxelGridSpec& spec) {
  require(labels.empty() || labels.size() == points.size(), ErrorCode::kInvalidArgument,
          "group_and_vote: label count differs from point count");
  VoxelizedFrame f;
  f.shape = spec.dims();
  f.point_to_voxel.assign(points.size(), -1);

  std::vector<std::pair<std::int64_t, int>> keyed;
  keyed.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = compute_voxel_index(points[i].x, points[i].y, points[i].z, spec);
    if (!c) {
      ++f.dropped;
      continue;
    }
    keyed.emplace_back(f.shape.linear(*c), static_cast<int>(i));
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  for (std::size_t k = 0; k < keyed.size(); ++k) {
    if (k == 0 || keyed[k].first != keyed[k - 1].first) {
      const std::int64_t lin = keyed[k].first;
      const auto x = static_cast<std::int32_t>(lin % f.shape.w);
      const auto y = static_cast<std::int32_t>((lin / f.shape.w) % f.shape.h);
      const auto z = static_cast<std::int32_t>(lin / (static_cast<std::int64_t>(f.shape.w) * f.shape.h));
      f.unique_indices.push_back({x, y, z});
      f.voxel_points.emplace_back();
    }
    const int row = static_cast<int>(f.unique_indices.size()) - 1;
    f.point_to_voxel[static_cast<std::size_t>(keyed[k].second)] = row;
    f.voxel_points.back().push_back(keyed[k].second);
  }

  if (!labels.empty()) {
    f.voxel_labels.reserve(f.num_voxels());
    std::map<std::int32_t, int> histogram;
    for (const auto& members : f.voxel_points) {
      histogram.clear();
      for (int p : members) ++histogram[labels[static_cast<std::size_t>(p)]];
      // Ordered map: the first maximum found is the lowest id.
      std::int32_t best = histogram.begin()->first;
      int best_count = 0;
      for (const auto& [label, count] : histogram) {
        if (count > best_count) {
          best = label;
          best_count = count;
        }
      }
      f.voxel_labels.push_back(best);
    }
  }
  return f;
}

ag::Mat point_features(const VoxelizedFrame& frame, std::span<const data::Point> points,
                       const VoxelGridSpec& spec) {
  require(frame.point_to_voxel.size() == points.size(), ErrorCode::kInvalidArgument,
          "point_features: frame was built from a different point list");
  const std::size_t kept = points.size() - frame.dropped;
  ag::Mat out(static_cast<ag::Index>(kept), kPointFeatures);
  ag::Index r = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int v = frame.point_to_voxel[i];
    if (v < 0) continue;
    const auto& p = points[i];
    const auto c = spec.voxel_center(frame.unique_indices[static_cast<std::size_t>(v)]);
    out.row(r++) << p.x, p.y, p.z, p.intensity, p.timestamp, c[0], c[1], c[2], p.x - c[0],
        p.y - c[1], p.z - c[2];
  }
  return out;
}

VfeParams make_vfe(nn::ParamStore& store, Rng& rng, const std::string& prefix,
                   const std::vector<int>& widths) {
  require(!widths.empty(), ErrorCode::kConfig, "voxel encoder needs at least one layer");
  VfeParams p;
  ag::Index in = kPointFeatures;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string name = prefix + ".mlp" + std::to_string(i);
    p.layers.push_back(nn::make_linear(store, rng, name, in, widths[i]));
    p.norms.push_back(nn::make_layer_norm(store, name + ".norm", widths[i]));
    in = widths[i];
  }
  return p;
}

ag::Var voxel_feature_encode(const VoxelizedFrame& frame, const ag::Var& point_rows,
                             const VfeParams& params) {
  require(!params.layers.empty() && point_rows.cols() == params.layers.front().in_features(),
          ErrorCode::kShapeMismatch,
          "voxel_feature_encode: encoder expects " +
              std::to_string(params.layers.empty() ? 0 : params.layers.front().in_features()) +
              " input features, got " + std::to_string(point_rows.cols()));
  std::vector<int> segment;
  segment.reserve(static_cast<std::size_t>(point_rows.rows()));
  for (int v : frame.point_to_voxel)
    if (v >= 0) segment.push_back(v);
  require(static_cast<ag::Index>(segment.size()) == point_rows.rows(), ErrorCode::kShapeMismatch,
          "voxel_feature_encode: point rows do not match the frame");
  ag::Var h = point_rows;
  for (std::size_t i = 0; i < params.layers.size(); ++i)
    h = ag::relu(params.norms[i](params.layers[i](h)));
  return ag::segment_max(h, segment, static_cast<ag::Index>(frame.num_voxels()));
}

ag::Var voxel_feature_encode(const VoxelizedFrame& frame, std::span<const data::Point> points,
                             const VoxelGridSpec& spec, const VfeParams& params) {
  return voxel_feature_encode(frame, ag::constant(point_features(frame, points, spec)), params);
}

}  // namespace lmt::voxel
