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

#include "lidarmt/xsf.hpp"

#include <cmath>
#include <numbers>

#include "lidarmt/error.hpp"
#include "lidarmt/ops.hpp"

namespace lmt::xsf {

namespace {

struct Corners {
  int row[4];      // -1 when outside
  double wgt[4];   // bilinear weights
  double du[4];    // d wgt / du
  double dv[4];    // d wgt / dv
};

Corners corners_of(int w, int h, double u, double v) {
  const double fu = std::floor(u), fv = std::floor(v);
  const double ax = u - fu, ay = v - fv;
  const int x0 = static_cast<int>(fu), y0 = static_cast<int>(fv);
  Corners c;
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  const double wx[4] = {1 - ax, ax, 1 - ax, ax};
  const double wy[4] = {1 - ay, 1 - ay, ay, ay};
  const double sx[4] = {-1, 1, -1, 1};
  const double sy[4] = {-1, -1, 1, 1};
  for (int k = 0; k < 4; ++k) {
    const bool in = xs[k] >= 0 && ys[k] >= 0 && xs[k] < w && ys[k] < h;
    c.row[k] = in ? ys[k] * w + xs[k] : -1;
    c.wgt[k] = wx[k] * wy[k];
    c.du[k] = sx[k] * wy[k];
    c.dv[k] = wx[k] * sy[k];
  }
  return c;
}

}  // namespace

ag::RowVec bilinear_sample(const Mat& map, int w, int h, double u, double v) {
  require(map.rows() == static_cast<Index>(w) * h, ErrorCode::kShapeMismatch,
          "bilinear_sample: map rows do not match w*h");
  ag::RowVec out = ag::RowVec::Zero(map.cols());
  if (!std::isfinite(u) || !std::isfinite(v)) return out;
  const Corners c = corners_of(w, h, u, v);
  for (int k = 0; k < 4; ++k)
    if (c.row[k] >= 0) out += c.wgt[k] * map.row(c.row[k]);
  return out;
}

Var deform_sample(const Var& values, const Var& locs, const Var& weights, const SampleGeometry& g) {
  const Index plane = static_cast<Index>(g.w) * g.h;
  const Index ns = g.n_samples();
  const Index q = locs.rows();
  require(values.rows() == plane * g.n_height && values.cols() == g.n_head * g.head_dim,
          ErrorCode::kShapeMismatch, "deform_sample: value volume shape mismatch");
  require(locs.cols() == 2 * ns && weights.rows() == q && weights.cols() == ns,
          ErrorCode::kShapeMismatch, "deform_sample: location/weight shape mismatch");
  const Index hd = g.head_dim;
  const Mat& val = values.value();
  const Mat& loc = locs.value();
  const Mat& wt = weights.value();
  Mat out = Mat::Zero(q, g.n_head * hd);
  for (Index r = 0; r < q; ++r)
    for (int i = 0; i < g.n_head; ++i)
      for (int j = 0; j < g.n_height; ++j)
        for (int p = 0; p < g.n_point; ++p) {
          const Index s = (static_cast<Index>(i) * g.n_height + j) * g.n_point + p;
          const double a = wt(r, s);
          const double u = loc(r, 2 * s), v = loc(r, 2 * s + 1);
          if (!std::isfinite(u) || !std::isfinite(v)) continue;
          const Corners c = corners_of(g.w, g.h, u, v);
          for (int k = 0; k < 4; ++k)
            if (c.row[k] >= 0)
              out.row(r).segment(i * hd, hd) += (a * c.wgt[k]) * val.row(j * plane + c.row[k]).segment(i * hd, hd);
        }
  return ag::make_result(std::move(out), {values, locs, weights}, [g, plane, hd, q](ag::Node& self) {
    const Mat& gout = self.grad;
    const Mat& val = self.input_value(0);
    const Mat& loc = self.input_value(1);
    const Mat& wt = self.input_value(2);
    const bool need_v = self.input_needs_grad(0), need_l = self.input_needs_grad(1),
               need_w = self.input_needs_grad(2);
    Mat* gv = need_v ? &self.input_grad(0) : nullptr;
    Mat* gl = need_l ? &self.input_grad(1) : nullptr;
    Mat* gw = need_w ? &self.input_grad(2) : nullptr;
    for (Index r = 0; r < q; ++r)
      for (int i = 0; i < g.n_head; ++i) {
        const auto go = gout.row(r).segment(i * hd, hd);
        for (int j = 0; j < g.n_height; ++j)
          for (int p = 0; p < g.n_point; ++p) {
            const Index s = (static_cast<Index>(i) * g.n_height + j) * g.n_point + p;
            const double a = wt(r, s);
            const double u = loc(r, 2 * s), v = loc(r, 2 * s + 1);
            if (!std::isfinite(u) || !std::isfinite(v)) continue;
            const Corners c = corners_of(g.w, g.h, u, v);
            double dw = 0, du = 0, dv = 0;
            for (int k = 0; k < 4; ++k) {
              if (c.row[k] < 0) continue;
              const Index vr = j * plane + c.row[k];
              const double d = go.dot(val.row(vr).segment(i * hd, hd));
              dw += c.wgt[k] * d;
              du += c.du[k] * d;
              dv += c.dv[k] * d;
              if (gv) gv->row(vr).segment(i * hd, hd) += (a * c.wgt[k]) * go;
            }
            if (gw) (*gw)(r, s) += dw;
            if (gl) {
              (*gl)(r, 2 * s) += a * du;
              (*gl)(r, 2 * s + 1) += a * dv;
            }
          }
      }
  });
}

DeformAttnParams make_deform_attn(nn::ParamStore& store, Rng& rng, const std::string& name,
                                  Index dim, int n_head, int n_height, int n_point, Index head_dim) {
  require(n_head > 0 && n_height > 0 && n_point > 0 && head_dim > 0, ErrorCode::kConfig,
          "deformable attention: head, height, point counts and head width must be positive");
  DeformAttnParams p;
  p.n_head = n_head;
  p.n_height = n_height;
  p.n_point = n_point;
  p.head_dim = head_dim;
  const Index ns = static_cast<Index>(n_head) * n_height * n_point;
  p.value_proj = nn::make_linear(store, rng, name + ".value", dim, n_head * head_dim);
  p.offset_gen = nn::make_linear(store, rng, name + ".offset", dim, 2 * ns);
  p.weight_gen = nn::make_linear(store, rng, name + ".weight_gen", dim, ns);
  p.out_proj = nn::make_linear(store, rng, name + ".out", n_head * head_dim, dim);
  p.offset_gen.weight.mutable_value().setZero();
  p.weight_gen.weight.mutable_value().setZero();
  p.weight_gen.bias.mutable_value().setZero();
  Mat& star = p.offset_gen.bias.mutable_value();
  for (int i = 0; i < n_head; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / n_head;
    for (int j = 0; j < n_height; ++j)
      for (int r = 0; r < n_point; ++r) {
        const Index s = (static_cast<Index>(i) * n_height + j) * n_point + r;
        const double radius = 0.25 * (r + 1);
        star(0, 2 * s) = radius * std::cos(theta);
        star(0, 2 * s + 1) = radius * std::sin(theta);
      }
  }
  return p;
}

DeformAttnOutput mh_deform_attn(const Var& queries, const Mat& refs, const Var& volume, int w, int h,
                                const DeformAttnParams& p) {
  const Index q = queries.rows();
  require(refs.rows() == q && refs.cols() == 2, ErrorCode::kShapeMismatch,
          "mh_deform_attn: need one (u, v) reference per query");
  require(volume.rows() == static_cast<Index>(w) * h * p.n_height, ErrorCode::kShapeMismatch,
          "mh_deform_attn: volume rows do not match w*h*n_height");
  const SampleGeometry g{w, h, p.n_height, p.n_head, p.n_point, p.head_dim};
  const Index ns = g.n_samples();
  const Var values = p.value_proj(volume);
  const Var offsets = p.offset_gen(queries);
  const Var weights = ag::softmax_groups(p.weight_gen(queries), static_cast<Index>(p.n_height) * p.n_point);
  Mat ref_tiled(q, 2 * ns);
  for (Index s = 0; s < ns; ++s) ref_tiled.middleCols(2 * s, 2) = refs;
  const Var locs = ag::add(offsets, ag::constant(std::move(ref_tiled)));
  const Mat& wv = weights.value();
  for (Index r = 0; r < q; ++r)
    for (int i = 0; i < p.n_head; ++i) {
      const double total = wv.row(r).segment(i * p.n_height * p.n_point, p.n_height * p.n_point).sum();
      require(!std::isfinite(total) || std::abs(total - 1.0) <= 1e-6, ErrorCode::kInternal,
              "mh_deform_attn: attention weights lost normalization");
    }
  require(offsets.value().allFinite(), ErrorCode::kDiverged, "mh_deform_attn: non-finite sampling offsets");
  DeformAttnOutput o;
  o.out = p.out_proj(deform_sample(values, locs, weights, g));
  o.offsets = offsets.value();
  o.weights = wv;
  return o;
}

XsfParams make_xsf(nn::ParamStore& store, Rng& rng, const std::string& prefix, Index dim, int n_height,
                   int bev_cells, const XsfConfig& config) {
  require(config.blocks >= 1, ErrorCode::kConfig, "xsf: at least one block is required");
  XsfParams p;
  for (int b = 0; b < config.blocks; ++b) {
    const std::string name = prefix + ".block" + std::to_string(b);
    XsfBlock blk;
    blk.norm_attn = nn::make_layer_norm(store, name + ".norm_attn", dim);
    blk.attn = make_deform_attn(store, rng, name + ".attn", dim, config.n_head, n_height,
                                config.n_point, config.head_dim);
    blk.norm_ffn = nn::make_layer_norm(store, name + ".norm_ffn", dim);
    blk.ffn = nn::make_feed_forward(store, rng, name + ".ffn", dim, config.ffn_dim);
    p.blocks.push_back(std::move(blk));
  }
  if (bev_cells > 0)
    p.pos_embed = store.create(prefix + ".pos_embed", nn::uniform_init(rng, bev_cells, dim, 0.1));
  return p;
}

namespace {

void record(OffsetTrace* trace, const Mat& refs, std::vector<int> heights, const DeformAttnOutput& o,
            const DeformAttnParams& p) {
  if (!trace) return;
  trace->blocks.push_back({refs, std::move(heights), o.offsets, o.weights, p.n_head, p.n_height, p.n_point});
}

}  // namespace

Var sparse_to_dense_xsf(const sparse::SparseTensor& coarse, const XsfParams& params, OffsetTrace* trace) {
  const SpatialShape s = coarse.shape;
  const Index cells = s.bev_cells();
  const Index rows = cells * s.d;
  require(params.pos_embed.defined() && params.pos_embed.rows() == cells, ErrorCode::kShapeMismatch,
          "sparse_to_dense_xsf: positional embedding does not cover the BEV grid");
  Mat refs(rows, 2);
  std::vector<int> cell_of(static_cast<std::size_t>(rows));
  std::vector<int> heights(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) {
    const Index cell = r % cells;
    refs(r, 0) = static_cast<double>(cell % s.w);
    refs(r, 1) = static_cast<double>(cell / s.w);
    cell_of[static_cast<std::size_t>(r)] = static_cast<int>(cell);
    heights[static_cast<std::size_t>(r)] = static_cast<int>(r / cells);
  }
  const Var pos = ag::gather_rows(params.pos_embed, cell_of);
  Var x = sparse::scatter_to_dense(coarse);
  for (const XsfBlock& b : params.blocks) {
    const Var n = b.norm_attn(x);
    const auto o = mh_deform_attn(ag::add(n, pos), refs, n, s.w, s.h, b.attn);
    record(trace, refs, heights, o, b.attn);
    x = ag::add(x, o.out);
    x = ag::add(x, b.ffn(b.norm_ffn(x)));
  }
  return sparse::height_collapse(x, s);
}

Var dense_to_sparse_xsf(const Var& bev, std::span<const Coord> coords, SpatialShape shape,
                        const XsfParams& params, OffsetTrace* trace) {
  const Var volume = sparse::height_expand(bev, shape);
  Var x = sparse::gather_from_dense(volume, coords, shape);
  Mat refs(static_cast<Index>(coords.size()), 2);
  std::vector<int> heights;
  heights.reserve(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    refs(static_cast<Index>(i), 0) = coords[i].x;
    refs(static_cast<Index>(i), 1) = coords[i].y;
    heights.push_back(coords[i].z);
  }
  for (const XsfBlock& b : params.blocks) {
    const auto o = mh_deform_attn(b.norm_attn(x), refs, volume, shape.w, shape.h, b.attn);
    record(trace, refs, heights, o, b.attn);
    x = ag::add(x, o.out);
    x = ag::add(x, b.ffn(b.norm_ffn(x)));
  }
  return x;
}

}  // namespace lmt::xsf
