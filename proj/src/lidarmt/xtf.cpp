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

#include "lidarmt/xtf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lidarmt/error.hpp"
#include "lidarmt/ops.hpp"

namespace lmt::xtf {

Mha make_mha(nn::ParamStore& store, Rng& rng, const std::string& name, Index q_dim, Index kv_dim,
             int n_head, Index head_dim) {
  require(n_head > 0 && head_dim > 0, ErrorCode::kConfig, "attention: heads and head width must be positive");
  Mha m;
  m.n_head = n_head;
  m.head_dim = head_dim;
  m.q = nn::make_linear(store, rng, name + ".q", q_dim, n_head * head_dim);
  m.k = nn::make_linear(store, rng, name + ".k", kv_dim, n_head * head_dim);
  m.v = nn::make_linear(store, rng, name + ".v", kv_dim, n_head * head_dim);
  m.o = nn::make_linear(store, rng, name + ".o", n_head * head_dim, q_dim);
  return m;
}

MhaOutput mha(const Mha& m, const Var& queries, const Var& keys, const Mat* blocked) {
  const Index nq = queries.rows(), nk = keys.rows();
  require(nk > 0, ErrorCode::kInvalidArgument, "attention: no keys");
  Mat bias;
  if (blocked) {
    require(blocked->rows() == nq && blocked->cols() == nk, ErrorCode::kShapeMismatch,
            "attention: mask shape does not match queries x keys");
    bias = Mat::Zero(nq, nk);
    for (Index r = 0; r < nq; ++r) {
      bool open = false;
      for (Index c = 0; c < nk; ++c) {
        if ((*blocked)(r, c) != 0.0) bias(r, c) = -1e30;
        else open = true;
      }
      require(open, ErrorCode::kInvalidArgument, "attention: a query has every key masked");
    }
  }
  const Var q = m.q(queries), k = m.k(keys), v = m.v(keys);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m.head_dim));
  MhaOutput out;
  std::vector<Var> heads;
  for (int i = 0; i < m.n_head; ++i) {
    const Index c0 = i * m.head_dim;
    Var logits = ag::scale(ag::matmul_nt(ag::slice_cols(q, c0, m.head_dim), ag::slice_cols(k, c0, m.head_dim)), scale);
    if (blocked) logits = ag::add(logits, ag::constant(bias));
    const Var attn = ag::softmax_rows(logits);
    out.maps.push_back(attn.value());
    heads.push_back(ag::matmul(attn, ag::slice_cols(v, c0, m.head_dim)));
  }
  out.out = m.o(heads.size() == 1 ? heads[0] : ag::concat_cols(heads));
  return out;
}

Var init_class_embedding(const Var& pred, const Var& features) {
  require(pred.rows() == features.rows(), ErrorCode::kShapeMismatch,
          "init_class_embedding: pred and features have different row counts");
  const Index n = pred.rows(), kc = pred.cols(), c = features.cols();
  const Mat& p = pred.value();
  const Mat& f = features.value();
  const ag::RowVec mass = p.colwise().sum();
  const ag::RowVec global = n > 0 ? ag::RowVec(f.colwise().mean()) : ag::RowVec::Zero(c);
  Mat out(kc, c);
  for (Index k = 0; k < kc; ++k)
    out.row(k) = mass(k) < kEmptyClassMass ? global : ag::RowVec((p.col(k).transpose() * f) / mass(k));
  return ag::make_result(std::move(out), {pred, features}, [mass, n, kc](ag::Node& self) {
    const Mat& g = self.grad;
    const Mat& p = self.input_value(0);
    const Mat& f = self.input_value(1);
    const Mat& eps = self.value;
    for (Index k = 0; k < kc; ++k) {
      if (mass(k) < kEmptyClassMass) {
        if (self.input_needs_grad(1) && n > 0)
          self.input_grad(1).rowwise() += g.row(k) / static_cast<double>(n);
        continue;
      }
      if (self.input_needs_grad(1)) self.input_grad(1) += (p.col(k) / mass(k)) * g.row(k);
      if (self.input_needs_grad(0))
        self.input_grad(0).col(k) += ((f.rowwise() - eps.row(k)) * g.row(k).transpose()) / mass(k);
    }
  });
}

CenterProposals propose_centers(const Mat& heatmap, int w, int h, int n_ctr) {
  const Index cells = static_cast<Index>(w) * h;
  require(heatmap.rows() == cells, ErrorCode::kShapeMismatch, "propose_centers: heatmap rows do not match w*h");
  const int kt = static_cast<int>(heatmap.cols());
  require(n_ctr >= 0 && n_ctr <= cells * kt, ErrorCode::kConfig,
          "propose_centers: more center queries than heatmap entries");
  struct Cand {
    double score;
    int key;
  };
  std::vector<Cand> peaks, rest;
  for (int k = 0; k < kt; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double s = heatmap(y * w + x, k);
        bool peak = true;
        for (int dy = -1; dy <= 1 && peak; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (heatmap(ny * w + nx, k) > s) {
              peak = false;
              break;
            }
          }
        (peak ? peaks : rest).push_back({s, k * static_cast<int>(cells) + y * w + x});
      }
  const auto order = [](const Cand& a, const Cand& b) {
    return a.score != b.score ? a.score > b.score : a.key < b.key;
  };
  std::sort(peaks.begin(), peaks.end(), order);
  std::sort(rest.begin(), rest.end(), order);
  if (static_cast<int>(peaks.size()) < n_ctr)
    peaks.insert(peaks.end(), rest.begin(), rest.begin() + (n_ctr - static_cast<int>(peaks.size())));
  peaks.resize(static_cast<std::size_t>(n_ctr));
  CenterProposals out;
  for (const Cand& c : peaks) {
    out.cells.push_back(c.key % static_cast<int>(cells));
    out.classes.push_back(c.key / static_cast<int>(cells));
    out.scores.push_back(c.score);
  }
  return out;
}

XtfParams make_xtf(nn::ParamStore& store, Rng& rng, const std::string& prefix, Index dim,
                   Index bev_dim, int bev_cells, const XtfConfig& config) {
  require(config.layers >= 1 && config.window >= 1 && config.window % 2 == 1 && config.n_ctr >= 1,
          ErrorCode::kConfig, "xtf: layers, odd window and center count must be positive");
  XtfParams p;
  p.config = config;
  p.class_init = nn::make_linear(store, rng, prefix + ".class_init", bev_dim, dim);
  p.center_proj = nn::make_linear(store, rng, prefix + ".center_proj", bev_dim, dim);
  p.center_pos = store.create(prefix + ".center_pos", nn::uniform_init(rng, bev_cells, dim, 0.1));
  const int nh = config.n_head;
  const Index hd = config.head_dim;
  for (int l = 0; l < config.layers; ++l) {
    const std::string n = prefix + ".layer" + std::to_string(l);
    XtfLayerParams lp;
    lp.norm_self = nn::make_layer_norm(store, n + ".norm_self", dim);
    lp.self_attn = make_mha(store, rng, n + ".self", dim, dim, nh, hd);
    lp.norm_cls_q = nn::make_layer_norm(store, n + ".norm_cls_q", dim);
    lp.norm_vox_kv = nn::make_layer_norm(store, n + ".norm_vox_kv", dim);
    lp.cls_to_vox = make_mha(store, rng, n + ".cls_to_vox", dim, dim, nh, hd);
    lp.norm_ctr_q = nn::make_layer_norm(store, n + ".norm_ctr_q", dim);
    lp.ctr_to_bev = make_mha(store, rng, n + ".ctr_to_bev", dim, bev_dim, nh, hd);
    lp.norm_cls_ffn = nn::make_layer_norm(store, n + ".norm_cls_ffn", dim);
    lp.norm_ctr_ffn = nn::make_layer_norm(store, n + ".norm_ctr_ffn", dim);
    lp.ffn_cls = nn::make_feed_forward(store, rng, n + ".ffn_cls", dim, config.ffn_dim);
    lp.ffn_ctr = nn::make_feed_forward(store, rng, n + ".ffn_ctr", dim, config.ffn_dim);
    lp.norm_vox_q = nn::make_layer_norm(store, n + ".norm_vox_q", dim);
    lp.norm_cls_kv = nn::make_layer_norm(store, n + ".norm_cls_kv", dim);
    lp.vox_to_cls = make_mha(store, rng, n + ".vox_to_cls", dim, dim, nh, hd);
    p.layers.push_back(std::move(lp));
  }
  p.phi = nn::make_linear(store, rng, prefix + ".phi", 2 * dim, dim);
  return p;
}

XtfState xtf_layer(const XtfState& in, const Var& bev, const std::vector<int>& ctr_cells, int w,
                   int h, const XtfLayerParams& p, const XtfConfig& config, XtfLayerTrace* trace) {
  const Index nk = in.cls.rows(), nc = in.ctr.rows(), m = in.vox.rows();
  require(static_cast<Index>(ctr_cells.size()) == nc, ErrorCode::kShapeMismatch,
          "xtf_layer: one BEV cell is needed per center query");
  require(bev.rows() == static_cast<Index>(w) * h, ErrorCode::kShapeMismatch, "xtf_layer: BEV rows do not match w*h");
  XtfState s = in;
  XtfLayerTrace local;
  XtfLayerTrace& t = trace ? *trace : local;

  const Var joint = nc > 0 ? ag::concat_rows({s.cls, s.ctr}) : s.cls;
  Mat cross;
  if (config.mask_cross_task && nc > 0) {
    cross = Mat::Zero(nk + nc, nk + nc);
    for (Index r = 0; r < nk + nc; ++r)
      for (Index c = 0; c < nk + nc; ++c) cross(r, c) = (r < nk) != (c < nk) ? 1.0 : 0.0;
  }
  const Var n = p.norm_self(joint);
  t.self = mha(p.self_attn, n, n, cross.size() ? &cross : nullptr);
  const Var mixed = ag::add(joint, t.self.out);
  s.cls = ag::slice_rows(mixed, 0, nk);
  if (nc > 0) s.ctr = ag::slice_rows(mixed, nk, nc);

  if (m > 0) {
    t.cls_to_vox = mha(p.cls_to_vox, p.norm_cls_q(s.cls), p.norm_vox_kv(s.vox));
    s.cls = ag::add(s.cls, t.cls_to_vox.out);
  }

  if (nc > 0) {
    const int half = config.window / 2;
    Mat outside = Mat::Ones(nc, bev.rows());
    for (Index r = 0; r < nc; ++r) {
      const int cx = ctr_cells[static_cast<std::size_t>(r)] % w, cy = ctr_cells[static_cast<std::size_t>(r)] / w;
      for (int y = std::max(0, cy - half); y <= std::min(h - 1, cy + half); ++y)
        for (int x = std::max(0, cx - half); x <= std::min(w - 1, cx + half); ++x) outside(r, y * w + x) = 0.0;
    }
    t.ctr_to_bev = mha(p.ctr_to_bev, p.norm_ctr_q(s.ctr), bev, &outside);
    s.ctr = ag::add(s.ctr, t.ctr_to_bev.out);
    s.ctr = ag::add(s.ctr, p.ffn_ctr(p.norm_ctr_ffn(s.ctr)));
  }
  s.cls = ag::add(s.cls, p.ffn_cls(p.norm_cls_ffn(s.cls)));

  if (m > 0) {
    t.vox_to_cls = mha(p.vox_to_cls, p.norm_vox_q(s.vox), p.norm_cls_kv(s.cls));
    s.vox = ag::add(s.vox, t.vox_to_cls.out);
  }
  return s;
}

Var center_queries(const Var& bev, const std::vector<int>& cells, const XtfParams& p) {
  return ag::add(p.center_proj(ag::gather_rows(bev, cells)), ag::gather_rows(p.center_pos, cells));
}

Var dynamic_kernel_logits(const Var& vox, const Var& refined, const Var& cls, const nn::Linear& phi) {
  require(vox.rows() == refined.rows() && phi.in_features() == vox.cols() + refined.cols() &&
              phi.out_features() == cls.cols(),
          ErrorCode::kShapeMismatch, "dynamic_kernel_logits: shape mismatch between features, phi and kernels");
  const double scale = 1.0 / std::sqrt(static_cast<double>(cls.cols()));
  return ag::scale(ag::matmul_nt(phi(ag::concat_cols({vox, refined})), cls), scale);
}

}  // namespace lmt::xtf
