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

#include "lidarmt/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "lidarmt/error.hpp"
#include "lidarmt/ops.hpp"

namespace lmt::backbone {

void BackboneConfig::validate() const {
  require(in_channels > 0 && base_channels > 0, ErrorCode::kConfig,
          "backbone: channel counts must be positive");
  for (int m : multipliers) require(m > 0, ErrorCode::kConfig, "backbone: multipliers must be positive");
  require(bev_levels >= 1 && bev_levels <= 4, ErrorCode::kConfig, "backbone: bev_levels must be in [1,4]");
}

ConvBlock make_conv_block(nn::ParamStore& store, Rng& rng, const std::string& name, int taps,
                          ag::Index in, ag::Index out) {
  ConvBlock b;
  const double bound = 1.0 / std::sqrt(static_cast<double>(taps * in));
  b.weight = store.create(name + ".weight", nn::uniform_init(rng, taps * in, out, bound));
  b.bias = store.create(name + ".bias", ag::Mat::Zero(1, out));
  b.norm = nn::make_layer_norm(store, name + ".norm", out);
  return b;
}

namespace {

Var finish(const Var& conv_out, const ConvBlock& b) { return ag::relu(b.norm(conv_out)); }

SparseTensor subm(const SparseTensor& t, const ConvBlock& b) {
  const auto out = sparse::submanifold_conv3d(t, b.weight, b.bias);
  return out.with_features(finish(out.features, b));
}

Var conv2d(const Var& x, int w, int h, int stride, const ConvBlock& b) {
  return finish(sparse::rulebook_conv(x, b.weight, b.bias, sparse::dense2d_rulebook(w, h, stride)), b);
}

}  // namespace

BackboneParams make_backbone(nn::ParamStore& store, Rng& rng, const std::string& prefix,
                             const BackboneConfig& config, int bev_height, int num_classes) {
  config.validate();
  BackboneParams p;
  p.config = config;
  for (int s = 0; s < kStages; ++s) {
    const ag::Index c = config.stage_channels(s);
    const ag::Index in = s == 0 ? config.in_channels : c;
    const std::string name = prefix + ".enc" + std::to_string(s);
    p.encoder.stage_convs.push_back({make_conv_block(store, rng, name + ".conv0", 27, in, c),
                                     make_conv_block(store, rng, name + ".conv1", 27, c, c)});
    if (s + 1 < kStages)
      p.encoder.down.push_back(
          make_conv_block(store, rng, name + ".down", 27, c, config.stage_channels(s + 1)));
  }
  for (int s = kStages - 2; s >= 0; --s) {
    const ag::Index c = config.stage_channels(s);
    const std::string name = prefix + ".dec" + std::to_string(s);
    p.decoder.up.push_back(make_conv_block(store, rng, name + ".up", 27, config.stage_channels(s + 1), c));
    p.decoder.fuse.push_back(make_conv_block(store, rng, name + ".fuse", 27, 2 * c, c));
  }
  const ag::Index cb = static_cast<ag::Index>(bev_height) * config.stage_channels(kStages - 1);
  for (int l = 0; l < config.bev_levels; ++l) {
    const std::string name = prefix + ".bev" + std::to_string(l);
    p.bev.lateral.push_back(make_conv_block(store, rng, name + ".lateral", 9, cb, cb));
    if (l + 1 < config.bev_levels) {
      p.bev.down.push_back(make_conv_block(store, rng, name + ".down", 9, cb, cb));
      p.bev.fuse.push_back(make_conv_block(store, rng, name + ".fuse", 9, 2 * cb, cb));
    }
  }
  p.aux_head = nn::make_linear(store, rng, prefix + ".aux_head", cb, num_classes);
  return p;
}

Encoded encode(const SparseTensor& input, const BackboneParams& params) {
  require(input.channels() == params.config.in_channels, ErrorCode::kShapeMismatch,
          "encode: input has " + std::to_string(input.channels()) + " channels, expected " +
              std::to_string(params.config.in_channels));
  Encoded e;
  SparseTensor cur = input;
  for (int s = 0; s < kStages; ++s) {
    const auto& convs = params.encoder.stage_convs[static_cast<std::size_t>(s)];
    cur = subm(subm(cur, convs[0]), convs[1]);
    e.scales.push_back(cur);
    if (s + 1 < kStages) {
      e.plans.push_back(sparse::strided_plan(*cur.coords, cur.shape));
      const ConvBlock& d = params.encoder.down[static_cast<std::size_t>(s)];
      const auto next = sparse::strided_conv3d(cur, e.plans.back(), d.weight, d.bias);
      cur = next.with_features(finish(next.features, d));
    }
  }
  return e;
}

BevMap project_to_bev(const SparseTensor& coarse) {
  return {sparse::height_collapse(sparse::scatter_to_dense(coarse), coarse.shape), coarse.shape.w,
          coarse.shape.h};
}

BevMap bev_extract(const BevMap& bev, const BevParams& params) {
  const std::size_t levels = params.lateral.size();
  std::vector<Var> feats;
  std::vector<std::pair<int, int>> dims;
  Var cur = bev.features;
  int w = bev.w, h = bev.h;
  for (std::size_t l = 0; l < levels; ++l) {
    if (l > 0) {
      cur = conv2d(cur, w, h, 2, params.down[l - 1]);
      w = (w + 1) / 2;
      h = (h + 1) / 2;
    }
    feats.push_back(conv2d(cur, w, h, 1, params.lateral[l]));
    dims.emplace_back(w, h);
  }
  Var top = feats.back();
  for (std::size_t l = levels - 1; l-- > 0;) {
    const auto [fw, fh] = dims[l];
    const int cw = dims[l + 1].first;
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(fw * fh));
    for (int y = 0; y < fh; ++y)
      for (int x = 0; x < fw; ++x) rows.push_back((y / 2) * cw + x / 2);
    top = conv2d(ag::concat_cols({feats[l], ag::gather_rows(top, rows)}), fw, fh, 1, params.fuse[l]);
  }
  return {top, bev.w, bev.h};
}

SparseTensor decode(const Encoded& encoded, const SparseTensor& injected,
                    const DecoderParams& params) {
  const SparseTensor& deepest = encoded.scales.back();
  require(*injected.coords == *deepest.coords && injected.shape == deepest.shape,
          ErrorCode::kShapeMismatch, "decode: injected coordinates differ from the deepest encoder scale");
  SparseTensor cur = injected;
  std::size_t i = 0;
  for (int s = kStages - 2; s >= 0; --s, ++i) {
    const SparseTensor& skip = encoded.scales[static_cast<std::size_t>(s)];
    const ConvBlock& up = params.up[i];
    const auto lifted = sparse::inverse_conv3d(cur, skip, encoded.plans[static_cast<std::size_t>(s)],
                                               up.weight, up.bias);
    const Var u = finish(lifted.features, up);
    cur = subm(skip.with_features(ag::concat_cols({u, skip.features})), params.fuse[i]);
  }
  return cur;
}

Var aux_seg_head(const Var& features, const nn::Linear& head) { return head(features); }

std::vector<int> occupied_bev_cells(const SparseTensor& t) {
  std::vector<int> cells;
  cells.reserve(t.size());
  for (const Coord& c : *t.coords) cells.push_back(c.y * t.shape.w + c.x);
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

}  // namespace lmt::backbone
