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

#include <string>
#include <vector>

#include "lidarmt/nn.hpp"
#include "lidarmt/random.hpp"

namespace lmt::xtf {

using ag::Index;
using ag::Mat;
using ag::Var;

struct Mha {
  int n_head = 1;
  Index head_dim = 1;
  nn::Linear q, k, v, o;
};

Mha make_mha(nn::ParamStore& store, Rng& rng, const std::string& name, Index q_dim, Index kv_dim,
             int n_head, Index head_dim);

struct MhaOutput {
  Var out;
  std::vector<Mat> maps;  // per head, Q x K
};

// blocked: optional Q x K matrix, nonzero entries are excluded from the
// softmax. Every query must keep at least one key.
MhaOutput mha(const Mha& m, const Var& queries, const Var& keys, const Mat* blocked = nullptr);

inline constexpr double kEmptyClassMass = 1e-8;

// pred: Mb x K row-stochastic scores; features: Mb x C.
Var init_class_embedding(const Var& pred, const Var& features);

struct CenterProposals {
  std::vector<int> cells;    // y*w + x
  std::vector<int> classes;  // thing index 0..K_thing-1
  std::vector<double> scores;
};

// heatmap: (h*w) x K_thing. Peaks are cells equal to their 3x3 per-class
// maximum, ranked by score then by (class*h*w + cell).
CenterProposals propose_centers(const Mat& heatmap, int w, int h, int n_ctr);

struct XtfConfig {
  int layers = 3;
  int n_head = 4;
  Index head_dim = 32;
  Index ffn_dim = 64;
  int window = 7;
  int n_ctr = 16;
  bool mask_cross_task = false;
};

struct XtfLayerParams {
  nn::LayerNorm norm_self;
  Mha self_attn;
  nn::LayerNorm norm_cls_q, norm_vox_kv;
  Mha cls_to_vox;
  nn::LayerNorm norm_ctr_q;
  Mha ctr_to_bev;
  nn::LayerNorm norm_cls_ffn, norm_ctr_ffn;
  nn::FeedForward ffn_cls, ffn_ctr;
  nn::LayerNorm norm_vox_q, norm_cls_kv;
  Mha vox_to_cls;
};

struct XtfParams {
  XtfConfig config;
  nn::Linear class_init;  // BEV width -> dim
  nn::Linear center_proj;
  Var center_pos;         // (h*w) x dim
  std::vector<XtfLayerParams> layers;
  nn::Linear phi;         // 2*dim -> dim
};

XtfParams make_xtf(nn::ParamStore& store, Rng& rng, const std::string& prefix, Index dim,
                   Index bev_dim, int bev_cells, const XtfConfig& config);

struct XtfState {
  Var cls;   // K x dim
  Var ctr;   // N x dim
  Var vox;   // M x dim
};

struct XtfLayerTrace {
  MhaOutput self;
  MhaOutput cls_to_vox;
  MhaOutput ctr_to_bev;
  MhaOutput vox_to_cls;
};

// ctr_cells: BEV cell of each center query; bev: (h*w) x bev_dim.
XtfState xtf_layer(const XtfState& in, const Var& bev, const std::vector<int>& ctr_cells, int w,
                   int h, const XtfLayerParams& p, const XtfConfig& config,
                   XtfLayerTrace* trace = nullptr);

Var center_queries(const Var& bev, const std::vector<int>& cells, const XtfParams& p);

// S = phi(concat(V, V')) * cls^T / sqrt(dim)
Var dynamic_kernel_logits(const Var& vox, const Var& refined, const Var& cls, const nn::Linear& phi);

}  // namespace lmt::xtf
