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

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "lidarmt/config.hpp"
#include "lidarmt/data.hpp"
#include "lidarmt/random.hpp"

namespace testing_fixtures {

// 16x16x8 grid (coarse BEV 2x2) with narrow layers.
inline std::string micro_config_text(int base_channels = 4) {
  return "grid.voxel_size = 1 1 0.5\n"
         "grid.range_min = 0 0 0\n"
         "grid.range_max = 16 16 4\n"
         "model.vfe_widths = 8 8\n"
         "model.base_channels = " + std::to_string(base_channels) + "\n"
         "model.xsf.blocks = 1\n"
         "model.xsf.heads = 2\n"
         "model.xsf.points = 2\n"
         "model.xsf.head_dim = 4\n"
         "model.xsf.ffn_dim = 8\n"
         "model.xtf.layers = 1\n"
         "model.xtf.heads = 2\n"
         "model.xtf.head_dim = 4\n"
         "model.xtf.ffn_dim = 8\n"
         "model.xtf.window = 3\n"
         "model.xtf.centers = 4\n"
         "model.det_hidden = 8\n"
         "data.seed_end = 1\n"
         "train.epochs = 1\n";
}

// Lines in extra replace base lines with the same key.
inline std::string micro_config_with(const std::string& extra, int base_channels = 4) {
  auto key_of = [](const std::string& line) { return line.substr(0, line.find('=')); };
  std::istringstream base(micro_config_text(base_channels)), over(extra);
  std::vector<std::string> keys;
  for (std::string line; std::getline(over, line);) keys.push_back(key_of(line));
  std::string text;
  for (std::string line; std::getline(base, line);)
    if (std::find(keys.begin(), keys.end(), key_of(line)) == keys.end()) text += line + "\n";
  return text + extra;
}

inline lmt::config::Config micro_config(const std::string& extra = "", int base_channels = 4) {
  return lmt::config::Config::parse(micro_config_with(extra, base_channels));
}

// A handful of points spread over distinct voxels: ground, a wall strip and
// one vehicle box.
inline lmt::data::SceneSample tiny_sample(std::uint64_t seed, int points = 30) {
  using namespace lmt::data;
  lmt::Rng rng(seed);
  SceneSample s;
  Box car;
  car.center = {5.5f, 5.5f, 1.0f};
  car.size = {3.0f, 1.8f, 1.5f};
  car.yaw = 0.3f;
  car.class_id = 1;
  s.boxes.push_back(car);
  for (int i = 0; i < points; ++i) {
    Point p;
    const int kind = i % 3;
    if (kind == 0) {
      p = {static_cast<float>(rng.uniform(0.2, 15.8)), static_cast<float>(rng.uniform(0.2, 15.8)), 0.2f};
      s.labels.push_back(kGround);
    } else if (kind == 1) {
      p = {static_cast<float>(rng.uniform(0.2, 15.8)), 15.5f, static_cast<float>(rng.uniform(0.3, 2.4))};
      s.labels.push_back(kWall);
    } else {
      p = {static_cast<float>(rng.uniform(4.6, 6.4)), static_cast<float>(rng.uniform(5.0, 6.0)),
           static_cast<float>(rng.uniform(0.5, 1.6))};
      s.labels.push_back(kVehicle);
    }
    p.intensity = static_cast<float>(rng.uniform(0.0, 1.0));
    s.points.push_back(p);
  }
  return s;
}

}  // namespace testing_fixtures
