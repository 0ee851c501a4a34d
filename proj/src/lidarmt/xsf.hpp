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

#include <span>
#include <string>
#include <vector>

#include "lidarmt/nn.hpp"
#include "lidarmt/random.hpp"
#include "lidarmt/sparse.hpp"

namespace lmt::xsf {

using ag::Index;
using ag::Mat;
using ag::Var;

// Bilinear read of a row-major (h*w) x C map at fractional (u, v), where
// integer (u, v) addresses cell (x=u, y=v). Corners outside the map read
// as zero.
ag::RowVec bilinear_sample(const Mat& map, int w, int h, double u, double v);

struct SampleGeometry {
  int w = 0;
  int h = 0;
  int n_height = 1;
  int n_head = 1;
  int n_point = 1;
  Index head_dim = 1;

  Index n_samples() const { return static_cast<Index>(n_head) * n_height * n_point; }
};

// values: (n_height*h*w) x (n_head*head_dim); locs: Q x (2*n_samples) as
// (u, v) pairs; weights: Q x n_samples. Sample columns are ordered
// ((head * n_height + height) * n_point + point). Returns Q x
// (n_head*head_dim) where each head block is the weighted sum of its
// samples.
Var deform_sample(const Var& values, const Var& locs, const Var& weights, const SampleGeometry& g);

struct DeformAttnParams {
  int n_head = 4;
  int n_height = 1;
  int n_point = 4;
  Index head_dim = 32;
  nn::Linear value_proj;
  nn::Linear offset_gen;
  nn::Linear weight_gen;
  nn::Linear out_proj;
};

DeformAttnParams make_deform_attn(nn::ParamStore& store, Rng& rng, const std::string& name,
                                  Index dim, int n_head, int n_height, int n_point, Index head_dim);

struct DeformAttnOutput {
  Var out;
  Mat offsets;  // Q x (2*n_samples)
  Mat weights;  // Q x n_samples, post-softmax
};

// refs: Q x 2 reference (u, v); volume: (n_height*h*w) x dim.
DeformAttnOutput mh_deform_attn(const Var& queries, const Mat& refs, const Var& volume, int w, int h,
                                const DeformAttnParams& p);

struct XsfBlock {
  nn::LayerNorm norm_attn;
  DeformAttnParams attn;
  nn::LayerNorm norm_ffn;
  nn::FeedForward ffn;
};

struct XsfConfig {
  int blocks = 2;
  int n_head = 4;
  int n_point = 4;
  Index head_dim = 32;
  Index ffn_dim = 256;
};

struct XsfParams {
  std::vector<XsfBlock> blocks;
  Var pos_embed;  // (h*w) x dim, sparse-to-dense only
};

XsfParams make_xsf(nn::ParamStore& store, Rng& rng, const std::string& prefix, Index dim, int n_height,
                   int bev_cells, const XsfConfig& config);

// Offsets and weights of every sampling point, for inspection.
struct OffsetTrace {
  struct Block {
    Mat refs;              // Q x 2
    std::vector<int> query_height;
    Mat offsets;
    Mat weights;
    int n_head = 0, n_height = 0, n_point = 0;
  };
  std::vector<Block> blocks;
};

// Returns the (h*w) x (d*C) BEV map for a 1/8-scale sparse tensor.
Var sparse_to_dense_xsf(const sparse::SparseTensor& coarse, const XsfParams& params,
                        OffsetTrace* trace = nullptr);

// bev: (h*w) x (d*C). Returns M x C features at coords.
Var dense_to_sparse_xsf(const Var& bev, std::span<const Coord> coords, SpatialShape shape,
                        const XsfParams& params, OffsetTrace* trace = nullptr);

}  // namespace lmt::xsf
