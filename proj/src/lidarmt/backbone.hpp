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
#include <string>
#include <vector>

#include "lidarmt/nn.hpp"
#include "lidarmt/random.hpp"
#include "lidarmt/sparse.hpp"

namespace lmt::backbone {

using ag::Var;
using sparse::SparseTensor;

inline constexpr int kStages = 4;

struct BackboneConfig {
  int in_channels = 64;
  int base_channels = 16;
  std::array<int, kStages> multipliers{1, 2, 4, 4};
  int bev_levels = 2;

  int stage_channels(int s) const { return base_channels * multipliers[static_cast<std::size_t>(s)]; }
  void validate() const;
};

// conv -> LayerNorm -> ReLU
struct ConvBlock {
  Var weight;  // (taps*in) x out
  Var bias;
  nn::LayerNorm norm;
};

ConvBlock make_conv_block(nn::ParamStore& store, Rng& rng, const std::string& name, int taps,
                          ag::Index in, ag::Index out);

struct EncoderParams {
  std::vector<std::array<ConvBlock, 2>> stage_convs;
  std::vector<ConvBlock> down;
};

struct DecoderParams {
  std::vector<ConvBlock> up;    // coarse stage s+1 -> stage s
  std::vector<ConvBlock> fuse;  // concat(up, skip) -> stage s
};

struct BevParams {
  std::vector<ConvBlock> lateral;  // per level
  std::vector<ConvBlock> down;     // level l -> l+1
  std::vector<ConvBlock> fuse;     // concat(level l, upsampled l+1) -> level l
};

struct BackboneParams {
  BackboneConfig config;
  EncoderParams encoder;
  DecoderParams decoder;
  BevParams bev;
  nn::Linear aux_head;
};

BackboneParams make_backbone(nn::ParamStore& store, Rng& rng, const std::string& prefix,
                             const BackboneConfig& config, int bev_height, int num_classes);

struct Encoded {
  std::vector<SparseTensor> scales;         // 1, 1/2, 1/4, 1/8
  std::vector<sparse::StridedPlan> plans;   // plans[s] maps scales[s] -> scales[s+1]
};

Encoded encode(const SparseTensor& input, const BackboneParams& params);

// Row-major (h*w) x C map.
struct BevMap {
  Var features;
  int w = 0;
  int h = 0;
};

BevMap project_to_bev(const SparseTensor& coarse);
BevMap bev_extract(const BevMap& bev, const BevParams& params);

SparseTensor decode(const Encoded& encoded, const SparseTensor& injected,
                    const DecoderParams& params);

Var aux_seg_head(const Var& features, const nn::Linear& head);

// Sorted unique BEV cell ids (y*w + x) holding at least one voxel.
std::vector<int> occupied_bev_cells(const SparseTensor& t);

}  // namespace lmt::backbone
