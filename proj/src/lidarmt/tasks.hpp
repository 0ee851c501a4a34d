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

#include "lidarmt/backbone.hpp"
#include "lidarmt/data.hpp"
#include "lidarmt/nn.hpp"

namespace lmt::tasks {

using ag::Index;
using ag::Mat;
using ag::Var;

inline constexpr int kRegChannels = 8;  // dx, dy, z, log l, log w, log h, sin yaw, cos yaw
inline constexpr double kFocalAlpha = 2.0;
inline constexpr double kFocalBeta = 4.0;
inline constexpr double kProbClamp = 1e-4;
inline constexpr double kHeatmapPrior = -2.19;

struct BevGrid {
  int w = 0;
  int h = 0;
  double cell_x = 1.0;
  double cell_y = 1.0;
  double min_x = 0.0;
  double min_y = 0.0;
};

struct DetectionTargets {
  Mat heatmap;                    // (h*w) x K_thing
  Mat reg;                        // (h*w) x 8, valid at center_cells
  std::vector<int> center_cells;  // unique
};

int gaussian_radius(const data::Box& box, const BevGrid& grid);
DetectionTargets encode_targets(std::span<const data::Box> boxes, const BevGrid& grid, int k_thing);

struct ScoredBox {
  data::Box box;
  double score = 0.0;
};

// heatmap holds probabilities. Peaks (3x3 per-class maxima) above
// threshold, best first, at most max_boxes.
std::vector<ScoredBox> decode_boxes(const Mat& heatmap, const Mat& reg, const BevGrid& grid,
                                    double threshold, int max_boxes);

Var focal_heatmap_loss(const Var& pred, const Mat& target);
Var l1_box_loss(const Var& pred, const Mat& target, std::span<const int> cells);
// labels are 0-based class indices.
Var ce_loss(const Var& logits, std::span<const int> labels);
Var lovasz_softmax(const Var& probs, std::span<const int> labels);

enum Task : int { kSeg = 0, kDetHeatmap = 1, kDetReg = 2, kAuxSeg = 3, kNumTasks = 4 };

// sum_k exp(-s_k) * L_k + s_k, s is 1 x losses.size()
Var uncertainty_combine(const std::vector<Var>& losses, const Var& log_vars);

struct DetHeadParams {
  backbone::ConvBlock shared;
  nn::Linear heatmap;
  nn::Linear reg;
  nn::Linear refine;  // center query width -> 8, zero at init
};

DetHeadParams make_det_head(nn::ParamStore& store, Rng& rng, const std::string& prefix, Index bev_dim,
                            Index hidden, int k_thing, Index center_dim);

struct DetOutput {
  Var heat_logits;  // (h*w) x K_thing
  Var reg;          // (h*w) x 8
};

DetOutput detection_head(const backbone::BevMap& bev, const DetHeadParams& p);
Var refine_regression(const Var& reg, const Var& centers, std::span<const int> cells, const DetHeadParams& p);

}  // namespace lmt::tasks
