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

#include <cstddef>
#include <string>
#include <vector>

#include "lidarmt/data.hpp"
#include "lidarmt/metrics.hpp"
#include "lidarmt/model.hpp"

namespace lmt::run {

// Segmentation and detection metrics over samples. Besides the metric
// report keys, adds seg.voxel_acc, seg.point_acc and det.center_recall
// (share of ground-truth boxes with a same-class prediction whose BEV
// center lies within one coarse cell on each axis).
metrics::Report evaluate(const model::Model& m, const std::vector<data::SceneSample>& samples);

// Per sample: point labels and scored boxes as key-value text.
std::string infer(const model::Model& m, const std::vector<data::SceneSample>& samples);

struct OffsetDump {
  std::string csv;  // header line plus one row per emitted sampling point
  std::size_t rows = 0;
  std::vector<std::size_t> rows_per_block;  // s2d blocks first, then d2s
};

// Sampling points of every cross-space block whose attention weight is at
// least the block's q-quantile; q = 0 keeps every point.
OffsetDump inspect_offsets(const model::Model& m, const data::SceneSample& sample, double quantile);

}  // namespace lmt::run
