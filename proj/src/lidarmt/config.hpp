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

// Experiment description. Every key lives under a section prefix:
//   grid.*   voxel grid (voxel_size, range_min, range_max: 3 values each)
//   model.*  architecture; together with grid.* these determine the
//            parameter layout and enter the config hash
//   loss.*   task switches and the uncertainty weighting switch
//   optim.*  AdamW and one-cycle schedule
//   train.*  seeds, epochs, augmentation, logging
//   data.*   dataset source, sweep merging, evaluation thresholds
//   scene.*  scene generator (see data::SceneSpec::from_file), used when
//            data.train is absent
// Unknown keys are rejected.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lidarmt/backbone.hpp"
#include "lidarmt/data.hpp"
#include "lidarmt/voxel.hpp"
#include "lidarmt/xsf.hpp"
#include "lidarmt/xtf.hpp"

namespace lmt::config {

struct ModelConfig {
  std::vector<int> vfe_widths{32, 64};
  backbone::BackboneConfig backbone;  // in_channels follows vfe_widths.back()
  bool xsf = true;
  xsf::XsfConfig xsf_cfg;
  bool xtf = true;
  xtf::XtfConfig xtf_cfg;
  int det_hidden = 32;
};

struct LossConfig {
  bool seg = true;
  bool lovasz = true;
  bool det = true;
  bool aux = true;
  bool uncertainty = true;
};

struct OptimConfig {
  double lr = 2e-3;  // peak
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double div_factor = 10.0;       // initial lr = lr / div_factor
  double final_div = 1000.0;      // final lr = lr / final_div
  double warmup_fraction = 0.3;
  double grad_clip = 10.0;        // global norm, 0 disables
};

struct TrainConfig {
  int epochs = 10;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 7;
  bool augment = false;
  std::uint64_t augment_seed = 11;
  bool shuffle = true;
};

struct DataConfig {
  std::string train;  // dataset file; empty means generate from scene.*
  std::uint64_t seed_begin = 0;
  std::uint64_t seed_end = 19;  // inclusive
  int frames = 1;               // sweeps merged into one sample
  double frame_interval = 0.1;
  double score_threshold = 0.3;
  int max_boxes = 32;
};

struct Config {
  voxel::VoxelGridSpec grid;
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  TrainConfig train;
  DataConfig data;
  data::SceneSpec scene;
  std::string base_dir;  // directory relative paths resolve against

  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::string& path);

  void validate() const;
  // Canonical text of every grid.* and model.* value.
  std::string model_signature() const;
  std::uint64_t hash() const;
  std::string to_text() const;
  std::string resolve(const std::string& path) const;
};

std::uint64_t fnv1a64(const std::string& s);

}  // namespace lmt::config
