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
#include <optional>
#include <vector>

#include "lidarmt/backbone.hpp"
#include "lidarmt/checkpoint.hpp"
#include "lidarmt/config.hpp"
#include "lidarmt/data.hpp"
#include "lidarmt/tasks.hpp"
#include "lidarmt/voxel.hpp"
#include "lidarmt/xsf.hpp"
#include "lidarmt/xtf.hpp"

namespace lmt::model {

using ag::Mat;
using ag::Var;

tasks::BevGrid bev_grid(const config::Config& cfg);

struct Model {
  config::Config cfg;
  nn::ParamStore store;
  voxel::VfeParams vfe;
  backbone::BackboneParams backbone;
  xsf::XsfParams s2d;  // empty when cfg.model.xsf is off
  xsf::XsfParams d2s;
  tasks::DetHeadParams det;
  xtf::XtfParams xtf;  // empty when cfg.model.xtf is off
  nn::Linear seg_head;  // used when cfg.model.xtf is off
  Var log_vars;         // 1 x tasks::kNumTasks

  SpatialShape full_shape() const { return cfg.grid.dims(); }
  tasks::BevGrid bev_grid() const { return model::bev_grid(cfg); }
};

Model build_model(const config::Config& cfg);

// Network input and training targets for one sample.
struct PreparedSample {
  data::SceneSample scene;  // sweeps merged, augmented when requested
  std::size_t current_points = 0;  // leading scene.points from the sample's own sweep
  voxel::VoxelizedFrame frame;
  Mat point_features;
  std::vector<int> voxel_targets;  // 0-based class per voxel
  std::vector<int> bev_cells;      // occupied coarse BEV cells, sorted
  std::vector<int> bev_targets;    // 0-based majority class per bev cell
  tasks::DetectionTargets det;
};

// Merges cfg.data.frames sweeps, applies aug when given, voxelizes and
// builds targets. Throws when no point falls inside the grid.
PreparedSample prepare(const data::SceneSample& sample, const config::Config& cfg,
                       const data::AugmentParams* aug = nullptr);

struct ForwardOutput {
  Var seg_logits;   // voxels x kNumClasses
  Var aux_logits;   // bev_cells x kNumClasses
  Var heat_logits;  // (h*w) x kNumThing
  Var reg;          // (h*w) x 8, refined by the center queries when XTF is on
  xtf::CenterProposals centers;
  std::vector<Coord> decoder_coords;
};

struct ForwardTrace {
  xsf::OffsetTrace s2d;
  xsf::OffsetTrace d2s;
  std::vector<xtf::XtfLayerTrace> xtf;
};

ForwardOutput forward(const Model& m, const PreparedSample& s, ForwardTrace* trace = nullptr);

struct LossBreakdown {
  std::array<double, tasks::kNumTasks> task{};  // unweighted, 0 when disabled
  double total = 0.0;
};

Var compute_loss(const Model& m, const PreparedSample& s, const ForwardOutput& out,
                 LossBreakdown* breakdown = nullptr);

struct Prediction {
  std::vector<std::int32_t> voxel_labels;  // 1-based
  std::vector<std::int32_t> point_labels;  // current sweep only; 1-based, 0 outside the grid
  std::vector<tasks::ScoredBox> boxes;
};

Prediction predict(const Model& m, const PreparedSample& s);

// Parameter values and config of a model.
ckpt::Checkpoint snapshot(const Model& m);
// Rebuilds the model stored in c. When runtime is given, its model hash
// must match the checkpoint.
Model restore(const ckpt::Checkpoint& c, const config::Config* runtime = nullptr);

}  // namespace lmt::model
