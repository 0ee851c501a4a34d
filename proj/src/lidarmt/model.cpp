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

#include "lidarmt/model.hpp"

#include <algorithm>
#include <map>

#include "lidarmt/error.hpp"
#include "lidarmt/sparse.hpp"

namespace lmt::model {
namespace {

constexpr int kCoarse = 8;  // three stride-2 stages

int bev_height(const config::Config& cfg) { return cfg.grid.dims().d / kCoarse; }

data::SceneSample merge_sweeps(const data::SceneSample& s, const config::Config& cfg) {
  const std::size_t extra = static_cast<std::size_t>(cfg.data.frames - 1);
  require(extra <= s.history.size(), ErrorCode::kInvalidArgument,
          "sample " + std::to_string(s.frame_id) + " has " + std::to_string(s.history.size()) +
              " history sweeps, data.frames needs " + std::to_string(extra));
  return data::concat_frames(
      s, std::span<const data::SceneSample>(s.history.data(), extra),
      std::span<const data::RigidTransform>(s.history_poses.data(), extra),
      cfg.data.frame_interval);
}

std::vector<int> zero_based(std::span<const std::int32_t> labels) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] - 1;
  return out;
}

Var seg_loss(const Var& logits, std::span<const int> labels, bool lovasz) {
  Var l = tasks::ce_loss(logits, labels);
  if (lovasz) l = ag::add(l, tasks::lovasz_softmax(ag::softmax_rows(logits), labels));
  return l;
}

}  // namespace

tasks::BevGrid bev_grid(const config::Config& cfg) {
  const SpatialShape s = cfg.grid.dims();
  return {s.w / kCoarse,
          s.h / kCoarse,
          cfg.grid.voxel_size[0] * kCoarse,
          cfg.grid.voxel_size[1] * kCoarse,
          cfg.grid.range_min[0],
          cfg.grid.range_min[1]};
}

Model build_model(const config::Config& cfg) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  Rng rng(cfg.train.init_seed);
  const auto& mc = cfg.model;
  const SpatialShape full = cfg.grid.dims();
  const int bev_cells = (full.w / kCoarse) * (full.h / kCoarse);
  const int nh = bev_height(cfg);
  const ag::Index c0 = mc.backbone.stage_channels(0);
  const ag::Index c3 = mc.backbone.stage_channels(backbone::kStages - 1);
  const ag::Index bev_dim = nh * c3;

  m.vfe = voxel::make_vfe(m.store, rng, "vfe", mc.vfe_widths);
  m.backbone = backbone::make_backbone(m.store, rng, "bb", mc.backbone, nh, data::kNumClasses);
  if (mc.xsf) {
    m.s2d = xsf::make_xsf(m.store, rng, "xsf.s2d", c3, nh, bev_cells, mc.xsf_cfg);
    m.d2s = xsf::make_xsf(m.store, rng, "xsf.d2s", c3, nh, 0, mc.xsf_cfg);
  }
  m.det = tasks::make_det_head(m.store, rng, "det", bev_dim, mc.det_hidden, data::kNumThing, c0);
  if (mc.xtf)
    m.xtf = xtf::make_xtf(m.store, rng, "xtf", c0, bev_dim, bev_cells, mc.xtf_cfg);
  else
    m.seg_head = nn::make_linear(m.store, rng, "seg_head", c0, data::kNumClasses);
  m.log_vars = m.store.create("loss.log_vars", Mat::Zero(1, tasks::kNumTasks));
  return m;
}

PreparedSample prepare(const data::SceneSample& sample, const config::Config& cfg,
                       const data::AugmentParams* aug) {
  PreparedSample p;
  p.scene = merge_sweeps(sample, cfg);
  p.current_points = sample.points.size();
  p.scene.history.clear();
  p.scene.history_poses.clear();
  if (aug) p.scene = data::augment(p.scene, *aug);
  p.frame = voxel::group_and_vote(p.scene.points, p.scene.labels, cfg.grid);
  require(p.frame.num_voxels() > 0, ErrorCode::kInvalidArgument,
          "sample " + std::to_string(sample.frame_id) + " has no points inside the voxel grid");
  p.point_features = voxel::point_features(p.frame, p.scene.points, cfg.grid);
  p.voxel_targets = zero_based(p.frame.voxel_labels);

  const SpatialShape full = cfg.grid.dims();
  const int w = full.w / kCoarse;
  std::map<int, std::array<int, data::kNumClasses>> votes;
  for (std::size_t v = 0; v < p.frame.num_voxels(); ++v) {
    const Coord& c = p.frame.unique_indices[v];
    auto& tally = votes[(c.y / kCoarse) * w + c.x / kCoarse];
    ++tally[static_cast<std::size_t>(p.voxel_targets[v])];
  }
  for (const auto& [cell, tally] : votes) {
    p.bev_cells.push_back(cell);
    p.bev_targets.push_back(static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin()));
  }
  p.det = tasks::encode_targets(p.scene.boxes, bev_grid(cfg), data::kNumThing);
  return p;
}

ForwardOutput forward(const Model& m, const PreparedSample& s, ForwardTrace* trace) {
  const auto& mc = m.cfg.model;
  const SpatialShape full = m.full_shape();
  ForwardOutput out;

  const Var vfe = voxel::voxel_feature_encode(s.frame, ag::constant(s.point_features), m.vfe);
  const auto input = sparse::SparseTensor::make(s.frame.unique_indices, vfe, full);
  const backbone::Encoded enc = backbone::encode(input, m.backbone);
  const sparse::SparseTensor& coarse = enc.scales.back();

  backbone::BevMap bev_in{};
  if (mc.xsf)
    bev_in = {xsf::sparse_to_dense_xsf(coarse, m.s2d, trace ? &trace->s2d : nullptr),
              coarse.shape.w, coarse.shape.h};
  else
    bev_in = backbone::project_to_bev(coarse);
  const backbone::BevMap bev = backbone::bev_extract(bev_in, m.backbone.bev);

  const Var injected =
      mc.xsf ? xsf::dense_to_sparse_xsf(bev.features, *coarse.coords, coarse.shape, m.d2s,
                                        trace ? &trace->d2s : nullptr)
             : sparse::gather_from_dense(sparse::height_expand(bev.features, coarse.shape),
                                         *coarse.coords, coarse.shape);
  const sparse::SparseTensor dec =
      backbone::decode(enc, coarse.with_features(injected), m.backbone.decoder);
  out.decoder_coords = *dec.coords;

  const std::vector<int> cells = backbone::occupied_bev_cells(coarse);
  const Var bev_sites = ag::gather_rows(bev.features, cells);
  out.aux_logits = backbone::aux_seg_head(bev_sites, m.backbone.aux_head);

  const tasks::DetOutput det = tasks::detection_head(bev, m.det);
  out.heat_logits = det.heat_logits;
  out.reg = det.reg;

  if (!mc.xtf) {
    out.seg_logits = m.seg_head(dec.features);
    return out;
  }
  const auto& xc = mc.xtf_cfg;
  out.centers = xtf::propose_centers(ag::sigmoid(det.heat_logits).value(), bev.w, bev.h, xc.n_ctr);
  xtf::XtfState st;
  st.cls = xtf::init_class_embedding(ag::softmax_rows(out.aux_logits), m.xtf.class_init(bev_sites));
  st.ctr = xtf::center_queries(bev.features, out.centers.cells, m.xtf);
  st.vox = dec.features;
  for (const auto& layer : m.xtf.layers) {
    xtf::XtfLayerTrace* lt = nullptr;
    if (trace) lt = &trace->xtf.emplace_back();
    st = xtf::xtf_layer(st, bev.features, out.centers.cells, bev.w, bev.h, layer, xc, lt);
  }
  out.seg_logits = xtf::dynamic_kernel_logits(dec.features, st.vox, st.cls, m.xtf.phi);
  out.reg = tasks::refine_regression(det.reg, st.ctr, out.centers.cells, m.det);
  return out;
}

Var compute_loss(const Model& m, const PreparedSample& s, const ForwardOutput& out,
                 LossBreakdown* breakdown) {
  const auto& lc = m.cfg.loss;
  std::vector<Var> losses;
  std::vector<int> ids;
  if (lc.seg) {
    losses.push_back(seg_loss(out.seg_logits, s.voxel_targets, lc.lovasz));
    ids.push_back(tasks::kSeg);
  }
  if (lc.det) {
    losses.push_back(tasks::focal_heatmap_loss(ag::sigmoid(out.heat_logits), s.det.heatmap));
    ids.push_back(tasks::kDetHeatmap);
    losses.push_back(tasks::l1_box_loss(out.reg, s.det.reg, s.det.center_cells));
    ids.push_back(tasks::kDetReg);
  }
  if (lc.aux) {
    losses.push_back(seg_loss(out.aux_logits, s.bev_targets, lc.lovasz));
    ids.push_back(tasks::kAuxSeg);
  }
  Var total;
  if (lc.uncertainty) {
    std::vector<Var> cols;
    for (int id : ids) cols.push_back(ag::slice_cols(m.log_vars, id, 1));
    total = tasks::uncertainty_combine(losses, ag::concat_cols(cols));
  } else {
    total = losses.front();
    for (std::size_t i = 1; i < losses.size(); ++i) total = ag::add(total, losses[i]);
  }
  if (breakdown) {
    *breakdown = {};
    for (std::size_t i = 0; i < ids.size(); ++i)
      breakdown->task[static_cast<std::size_t>(ids[i])] = losses[i].scalar();
    breakdown->total = total.scalar();
  }
  return total;
}

Prediction predict(const Model& m, const PreparedSample& s) {
  ag::NoGradGuard guard;
  const ForwardOutput out = forward(m, s);
  Prediction p;
  const Mat& logits = out.seg_logits.value();
  p.voxel_labels.resize(static_cast<std::size_t>(logits.rows()));
  for (ag::Index r = 0; r < logits.rows(); ++r) {
    ag::Index best = 0;
    logits.row(r).maxCoeff(&best);
    p.voxel_labels[static_cast<std::size_t>(r)] = static_cast<std::int32_t>(best + 1);
  }
  p.point_labels = voxel::devoxelize<std::int32_t>(p.voxel_labels, s.frame.point_to_voxel, 0);
  p.point_labels.resize(s.current_points);
  p.boxes = tasks::decode_boxes(ag::sigmoid(out.heat_logits).value(), out.reg.value(), m.bev_grid(),
                                m.cfg.data.score_threshold, m.cfg.data.max_boxes);
  return p;
}

ckpt::Checkpoint snapshot(const Model& m) {
  ckpt::Checkpoint c;
  c.config_text = m.cfg.to_text();
  c.config_hash = m.cfg.hash();
  for (const auto& [name, v] : m.store.all()) c.params.emplace(name, v.value());
  return c;
}

Model restore(const ckpt::Checkpoint& c, const config::Config* runtime) {
  config::Config cfg = config::Config::parse(c.config_text, "<checkpoint>");
  require(cfg.hash() == c.config_hash, ErrorCode::kCheckpointMismatch,
          "checkpoint config hash does not match its stored config");
  if (runtime) {
    require(runtime->hash() == c.config_hash, ErrorCode::kCheckpointMismatch,
            "config hash mismatch: checkpoint was trained with a different model/grid config");
    cfg = *runtime;
  }
  Model m = build_model(cfg);
  require(m.store.all().size() == c.params.size(), ErrorCode::kCheckpointMismatch,
          "checkpoint holds " + std::to_string(c.params.size()) + " tensors, model expects " +
              std::to_string(m.store.all().size()));
  for (auto& [name, v] : m.store.all()) {
    auto it = c.params.find(name);
    require(it != c.params.end(), ErrorCode::kCheckpointMismatch,
            "checkpoint lacks tensor '" + name + "'");
    require(it->second.rows() == v.rows() && it->second.cols() == v.cols(),
            ErrorCode::kCheckpointMismatch, "tensor '" + name + "' has the wrong shape");
    v.mutable_value() = it->second;
  }
  return m;
}

}  // namespace lmt::model
