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

#include "lidarmt/sparse.hpp"

#include <algorithm>
#include <string>

#include "lidarmt/error.hpp"
#include "lidarmt/ops.hpp"

namespace lmt::sparse {
namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

CoordIndex::CoordIndex(std::span<const Coord> coords, SpatialShape shape) : shape_(shape) {
  std::size_t cap = 16;
  while (cap < 2 * coords.size()) cap <<= 1;
  keys_.assign(cap, -1);
  rows_.assign(cap, -1);
  mask_ = cap - 1;
  for (std::size_t r = 0; r < coords.size(); ++r) {
    require(shape.contains(coords[r]), ErrorCode::kOutOfRange,
            "coordinate (" + std::to_string(coords[r].x) + "," + std::to_string(coords[r].y) +
                "," + std::to_string(coords[r].z) + ") outside spatial shape");
    const std::int64_t key = shape.linear(coords[r]);
    std::size_t s = slot_of(key);
    require(keys_[s] != key, ErrorCode::kInvalidArgument, "duplicate voxel coordinate");
    keys_[s] = key;
    rows_[s] = static_cast<int>(r);
    ++count_;
  }
}

std::size_t CoordIndex::slot_of(std::int64_t key) const {
  std::size_t s = static_cast<std::size_t>(mix(static_cast<std::uint64_t>(key))) & mask_;
  while (keys_[s] != -1 && keys_[s] != key) s = (s + 1) & mask_;
  return s;
}

int CoordIndex::find(const Coord& c) const {
  if (!shape_.contains(c)) return -1;
  const std::int64_t key = shape_.linear(c);
  const std::size_t s = slot_of(key);
  return keys_[s] == key ? rows_[s] : -1;
}

SparseTensor SparseTensor::make(std::vector<Coord> coords, ag::Var features, SpatialShape shape) {
  require(features.rows() == static_cast<ag::Index>(coords.size()), ErrorCode::kShapeMismatch,
          "sparse tensor: " + std::to_string(coords.size()) + " coordinates but " +
              std::to_string(features.rows()) + " feature rows");
  SparseTensor t;
  auto shared = std::make_shared<const std::vector<Coord>>(std::move(coords));
  t.index = std::make_shared<const CoordIndex>(*shared, shape);
  t.coords = std::move(shared);
  t.features = std::move(features);
  t.shape = shape;
  return t;
}

SparseTensor SparseTensor::with_features(ag::Var f) const {
  require(f.rows() == static_cast<ag::Index>(size()), ErrorCode::kShapeMismatch,
          "sparse tensor: feature rows do not match coordinates");
  SparseTensor t = *this;
  t.features = std::move(f);
  return t;
}

Rulebook Rulebook::transposed() const {
  Rulebook r;
  r.kernel_volume = kernel_volume;
  r.n_in = n_out;
  r.n_out = n_in;
  r.in_rows = out_rows;
  r.out_rows = in_rows;
  return r;
}

std::size_t Rulebook::pair_count() const {
  std::size_t n = 0;
  for (const auto& v : in_rows) n += v.size();
  return n;
}

Coord kernel_offset3d(int k) { return {k % 3 - 1, (k / 3) % 3 - 1, k / 9 - 1}; }

Rulebook submanifold_rulebook(std::span<const Coord> coords, const CoordIndex& index,
                              SpatialShape shape) {
  (void)shape;
  Rulebook r;
  r.kernel_volume = kKernel3d;
  r.n_in = r.n_out = static_cast<ag::Index>(coords.size());
  r.in_rows.resize(kKernel3d);
  r.out_rows.resize(kKernel3d);
  for (int k = 0; k < kKernel3d; ++k) {
    const Coord d = kernel_offset3d(k);
    for (std::size_t o = 0; o < coords.size(); ++o) {
      const Coord& c = coords[o];
      const int i = index.find({c.x + d.x, c.y + d.y, c.z + d.z});
      if (i >= 0) {
        r.in_rows[static_cast<std::size_t>(k)].push_back(i);
        r.out_rows[static_cast<std::size_t>(k)].push_back(static_cast<int>(o));
      }
    }
  }
  return r;
}

StridedPlan strided_plan(std::span<const Coord> coords, SpatialShape shape) {
  require(shape.w % 2 == 0 && shape.h % 2 == 0 && shape.d % 2 == 0, ErrorCode::kShapeMismatch,
          "strided conv: spatial shape (" + std::to_string(shape.w) + "," +
              std::to_string(shape.h) + "," + std::to_string(shape.d) + ") is not divisible by 2");
  StridedPlan p;
  p.out_shape = {shape.w / 2, shape.h / 2, shape.d / 2};
  std::vector<std::int64_t> keys;
  keys.reserve(coords.size());
  for (const Coord& c : coords) keys.push_back(p.out_shape.linear({c.x / 2, c.y / 2, c.z / 2}));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  const std::int64_t plane = static_cast<std::int64_t>(p.out_shape.w) * p.out_shape.h;
  for (std::int64_t key : keys)
    p.out_coords.push_back({static_cast<std::int32_t>(key % p.out_shape.w),
                            static_cast<std::int32_t>((key / p.out_shape.w) % p.out_shape.h),
                            static_cast<std::int32_t>(key / plane)});

  const CoordIndex in_index(coords, shape);
  p.rules.kernel_volume = kKernel3d;
  p.rules.n_in = static_cast<ag::Index>(coords.size());
  p.rules.n_out = static_cast<ag::Index>(p.out_coords.size());
  p.rules.in_rows.resize(kKernel3d);
  p.rules.out_rows.resize(kKernel3d);
  for (int k = 0; k < kKernel3d; ++k) {
    const Coord d = kernel_offset3d(k);
    for (std::size_t o = 0; o < p.out_coords.size(); ++o) {
      const Coord& c = p.out_coords[o];
      const int i = in_index.find({2 * c.x + d.x, 2 * c.y + d.y, 2 * c.z + d.z});
      if (i >= 0) {
        p.rules.in_rows[static_cast<std::size_t>(k)].push_back(i);
        p.rules.out_rows[static_cast<std::size_t>(k)].push_back(static_cast<int>(o));
      }
    }
  }
  return p;
}

Rulebook dense2d_rulebook(int w, int h, int stride) {
  require(stride >= 1 && w > 0 && h > 0, ErrorCode::kInvalidArgument, "dense2d: bad geometry");
  const int ow = (w + stride - 1) / stride;
  const int oh = (h + stride - 1) / stride;
  Rulebook r;
  r.kernel_volume = 9;
  r.n_in = static_cast<ag::Index>(w) * h;
  r.n_out = static_cast<ag::Index>(ow) * oh;
  r.in_rows.resize(9);
  r.out_rows.resize(9);
  for (int k = 0; k < 9; ++k) {
    const int dx = k % 3 - 1, dy = k / 3 - 1;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = stride * ox + dx, iy = stride * oy + dy;
        if (ix < 0 || iy < 0 || ix >= w || iy >= h) continue;
        r.in_rows[static_cast<std::size_t>(k)].push_back(iy * w + ix);
        r.out_rows[static_cast<std::size_t>(k)].push_back(oy * ow + ox);
      }
  }
  return r;
}

ag::Var rulebook_conv(const ag::Var& x, const ag::Var& weight, const ag::Var& bias,
                      const Rulebook& rules) {
  const ag::Index cin = x.cols();
  const ag::Index cout = weight.cols();
  require(weight.rows() == rules.kernel_volume * cin, ErrorCode::kShapeMismatch,
          "conv: kernel has " + std::to_string(weight.rows()) + " rows, expected " +
              std::to_string(rules.kernel_volume) + " taps x " + std::to_string(cin) +
              " input channels");
  require(x.rows() == rules.n_in, ErrorCode::kShapeMismatch, "conv: input rows do not match rulebook");
  require(!bias.defined() || (bias.rows() == 1 && bias.cols() == cout), ErrorCode::kShapeMismatch,
          "conv: bias must be 1x" + std::to_string(cout));

  auto rb = std::make_shared<const Rulebook>(rules);
  ag::Mat out = ag::Mat::Zero(rules.n_out, cout);
  ag::Mat gathered;
  ag::Mat partial;
  for (int k = 0; k < rules.kernel_volume; ++k) {
    const auto& in_rows = rb->in_rows[static_cast<std::size_t>(k)];
    if (in_rows.empty()) continue;
    const auto& out_rows = rb->out_rows[static_cast<std::size_t>(k)];
    const auto n = static_cast<ag::Index>(in_rows.size());
    gathered.resize(n, cin);
    for (ag::Index p = 0; p < n; ++p) gathered.row(p) = x.value().row(in_rows[static_cast<std::size_t>(p)]);
    partial.noalias() = gathered * weight.value().middleRows(k * cin, cin);
    for (ag::Index p = 0; p < n; ++p) out.row(out_rows[static_cast<std::size_t>(p)]) += partial.row(p);
  }
  if (bias.defined()) out.rowwise() += bias.value().row(0);

  std::vector<ag::Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return ag::make_result(std::move(out), inputs, [rb, cin](ag::Node& self) {
    const bool gx = self.input_needs_grad(0);
    const bool gw = self.input_needs_grad(1);
    const ag::Mat& xin = self.input_value(0);
    const ag::Mat& w = self.input_value(1);
    ag::Mat gathered, gout, tmp;
    for (int k = 0; k < rb->kernel_volume; ++k) {
      const auto& in_rows = rb->in_rows[static_cast<std::size_t>(k)];
      if (in_rows.empty()) continue;
      const auto& out_rows = rb->out_rows[static_cast<std::size_t>(k)];
      const auto n = static_cast<ag::Index>(in_rows.size());
      gout.resize(n, self.grad.cols());
      for (ag::Index p = 0; p < n; ++p) gout.row(p) = self.grad.row(out_rows[static_cast<std::size_t>(p)]);
      if (gw) {
        gathered.resize(n, cin);
        for (ag::Index p = 0; p < n; ++p) gathered.row(p) = xin.row(in_rows[static_cast<std::size_t>(p)]);
        self.input_grad(1).middleRows(k * cin, cin).noalias() += gathered.transpose() * gout;
      }
      if (gx) {
        tmp.noalias() = gout * w.middleRows(k * cin, cin).transpose();
        ag::Mat& g = self.input_grad(0);
        for (ag::Index p = 0; p < n; ++p) g.row(in_rows[static_cast<std::size_t>(p)]) += tmp.row(p);
      }
    }
    if (self.inputs.size() > 2 && self.input_needs_grad(2))
      self.input_grad(2) += self.grad.colwise().sum();
  });
}

SparseTensor submanifold_conv3d(const SparseTensor& t, const ag::Var& weight, const ag::Var& bias) {
  const Rulebook rules = submanifold_rulebook(*t.coords, *t.index, t.shape);
  return t.with_features(rulebook_conv(t.features, weight, bias, rules));
}

SparseTensor strided_conv3d(const SparseTensor& t, const ag::Var& weight, const ag::Var& bias) {
  return strided_conv3d(t, strided_plan(*t.coords, t.shape), weight, bias);
}

SparseTensor strided_conv3d(const SparseTensor& t, const StridedPlan& plan, const ag::Var& weight,
                            const ag::Var& bias) {
  require(plan.rules.n_in == static_cast<ag::Index>(t.size()), ErrorCode::kShapeMismatch,
          "strided conv: plan built for a different coordinate set");
  ag::Var f = rulebook_conv(t.features, weight, bias, plan.rules);
  return SparseTensor::make(plan.out_coords, std::move(f), plan.out_shape);
}

SparseTensor inverse_conv3d(const SparseTensor& coarse, const SparseTensor& fine_template,
                            const StridedPlan& plan, const ag::Var& weight, const ag::Var& bias) {
  require(*coarse.coords == plan.out_coords, ErrorCode::kShapeMismatch,
          "inverse conv: coarse coordinates differ from the plan's output sites");
  require(plan.rules.n_in == static_cast<ag::Index>(fine_template.size()), ErrorCode::kShapeMismatch,
          "inverse conv: fine template differs from the plan's input sites");
  ag::Var f = rulebook_conv(coarse.features, weight, bias, plan.rules.transposed());
  return fine_template.with_features(std::move(f));
}

ag::Var scatter_to_dense(const SparseTensor& t) {
  std::vector<int> rows;
  rows.reserve(t.size());
  for (const Coord& c : *t.coords) rows.push_back(static_cast<int>(t.shape.linear(c)));
  return ag::scatter_add_rows(t.features, rows, static_cast<ag::Index>(t.shape.volume()));
}

ag::Var gather_from_dense(const ag::Var& dense, std::span<const Coord> coords, SpatialShape shape) {
  require(dense.rows() == static_cast<ag::Index>(shape.volume()), ErrorCode::kShapeMismatch,
          "gather_from_dense: dense rows do not match the spatial shape");
  std::vector<int> rows;
  rows.reserve(coords.size());
  for (const Coord& c : coords) {
    require(shape.contains(c), ErrorCode::kOutOfRange, "gather_from_dense: coordinate out of range");
    rows.push_back(static_cast<int>(shape.linear(c)));
  }
  return ag::gather_rows(dense, rows);
}

ag::Var height_collapse(const ag::Var& dense, SpatialShape shape) {
  const ag::Index cells = shape.bev_cells();
  const ag::Index c = dense.cols();
  require(dense.rows() == cells * shape.d, ErrorCode::kShapeMismatch,
          "height_collapse: dense rows do not match the spatial shape");
  ag::Mat out(cells, c * shape.d);
  for (ag::Index z = 0; z < shape.d; ++z)
    out.middleCols(z * c, c) = dense.value().middleRows(z * cells, cells);
  return ag::make_result(std::move(out), {dense}, [cells, c, d = shape.d](ag::Node& self) {
    ag::Mat& g = self.input_grad(0);
    for (ag::Index z = 0; z < d; ++z) g.middleRows(z * cells, cells) += self.grad.middleCols(z * c, c);
  });
}

ag::Var height_expand(const ag::Var& bev, SpatialShape shape) {
  const ag::Index cells = shape.bev_cells();
  require(bev.rows() == cells, ErrorCode::kShapeMismatch,
          "height_expand: BEV rows do not match the spatial shape");
  require(shape.d > 0 && bev.cols() % shape.d == 0, ErrorCode::kShapeMismatch,
          "height_expand: " + std::to_string(bev.cols()) + " channels not divisible by " +
              std::to_string(shape.d) + " heights");
  const ag::Index c = bev.cols() / shape.d;
  ag::Mat out(cells * shape.d, c);
  for (ag::Index z = 0; z < shape.d; ++z)
    out.middleRows(z * cells, cells) = bev.value().middleCols(z * c, c);
  return ag::make_result(std::move(out), {bev}, [cells, c, d = shape.d](ag::Node& self) {
    ag::Mat& g = self.input_grad(0);
    for (ag::Index z = 0; z < d; ++z) g.middleCols(z * c, c) += self.grad.middleRows(z * cells, cells);
  });
}

}  // namespace lmt::sparse
