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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "lidarmt/backbone.hpp"
#include "lidarmt/error.hpp"
#include "lidarmt/ops.hpp"
#include "support/gradcheck.hpp"

namespace lmt::backbone {
namespace {

using ag::Index;
using ag::Mat;

std::vector<Coord> random_sites(std::mt19937_64& gen, SpatialShape shape, std::size_t n) {
  std::set<Coord> s;
  std::uniform_int_distribution<int> ux(0, shape.w - 1), uy(0, shape.h - 1), uz(0, shape.d - 1);
  while (s.size() < n) s.insert({ux(gen), uy(gen), uz(gen)});
  std::vector<Coord> out(s.begin(), s.end());
  std::shuffle(out.begin(), out.end(), gen);
  return out;
}

struct Fixture {
  nn::ParamStore store;
  Rng rng{1};
  BackboneParams params;

  Fixture(int in, int c, int bev_height, int levels = 2) {
    BackboneConfig cfg;
    cfg.in_channels = in;
    cfg.base_channels = c;
    cfg.bev_levels = levels;
    params = make_backbone(store, rng, "bb", cfg, bev_height, 6);
  }
};

SparseTensor random_tensor(std::mt19937_64& gen, Rng& rng, SpatialShape shape, std::size_t n, Index c) {
  auto coords = random_sites(gen, shape, n);
  return SparseTensor::make(coords, ag::constant(testing::random_mat(rng, static_cast<Index>(n), c, 1.0)), shape);
}

TEST(Encode, ScaleShapesHalve) {
  Fixture fx(4, 4, 1);
  std::mt19937_64 gen(1);
  const auto t = random_tensor(gen, fx.rng, {32, 32, 8}, 60, 4);
  const Encoded e = encode(t, fx.params);
  ASSERT_EQ(e.scales.size(), 4u);
  EXPECT_EQ(e.scales[0].shape, (SpatialShape{32, 32, 8}));
  EXPECT_EQ(e.scales[1].shape, (SpatialShape{16, 16, 4}));
  EXPECT_EQ(e.scales[2].shape, (SpatialShape{8, 8, 2}));
  EXPECT_EQ(e.scales[3].shape, (SpatialShape{4, 4, 1}));
  EXPECT_EQ(e.scales[0].channels(), 4);
  EXPECT_EQ(e.scales[1].channels(), 8);
  EXPECT_EQ(e.scales[2].channels(), 16);
  EXPECT_EQ(e.scales[3].channels(), 16);
}

TEST(Encode, EmptyInputGivesEmptyScales) {
  Fixture fx(3, 4, 1);
  const auto t = SparseTensor::make({}, ag::constant(Mat::Zero(0, 3)), {32, 32, 8});
  const Encoded e = encode(t, fx.params);
  ASSERT_EQ(e.scales.size(), 4u);
  for (const auto& s : e.scales) EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(e.scales[3].shape, (SpatialShape{4, 4, 1}));
}

TEST(Encode, SingleVoxelPropagatesByCoordinateArithmetic) {
  Fixture fx(2, 4, 1);
  for (const Coord c : {Coord{0, 0, 0}, Coord{31, 17, 5}, Coord{9, 22, 7}}) {
    const auto t = SparseTensor::make({c}, ag::constant(Mat::Ones(1, 2)), {32, 32, 8});
    const Encoded e = encode(t, fx.params);
    for (int s = 0; s < 4; ++s) {
      const Coord expect{c.x >> s, c.y >> s, c.z >> s};
      ASSERT_EQ(e.scales[static_cast<std::size_t>(s)].size(), 1u);
      EXPECT_EQ((*e.scales[static_cast<std::size_t>(s)].coords)[0], expect);
    }
  }
}

TEST(Encode, ChannelMismatchIsShapeError) {
  Fixture fx(3, 4, 1);
  const auto t = SparseTensor::make({{0, 0, 0}}, ag::constant(Mat::Zero(1, 5)), {32, 32, 8});
  EXPECT_THROW(encode(t, fx.params), Error);
}

TEST(BevExtract, ZeroInZeroOutAndShape) {
  Fixture fx(2, 4, 2);
  const BevMap zero{ag::constant(Mat::Zero(16, 32)), 4, 4};
  const BevMap out = bev_extract(zero, fx.params.bev);
  EXPECT_EQ(out.features.rows(), 16);
  EXPECT_EQ(out.features.cols(), 32);
  EXPECT_EQ(out.features.value().cwiseAbs().maxCoeff(), 0.0);

  const BevMap rnd{ag::constant(testing::random_mat(fx.rng, 15, 32, 1.0)), 5, 3};
  const BevMap o2 = bev_extract(rnd, fx.params.bev);
  EXPECT_EQ(o2.w, 5);
  EXPECT_EQ(o2.h, 3);
  EXPECT_EQ(o2.features.rows(), 15);
  EXPECT_EQ(o2.features.cols(), 32);
}

TEST(BevExtract, GradientsMatchFiniteDifferences) {
  BackboneConfig cfg;
  cfg.in_channels = 2;
  cfg.base_channels = 1;
  cfg.multipliers = {1, 1, 1, 3};
  nn::ParamStore store;
  Rng rng(4);
  const auto params = make_backbone(store, rng, "bb", cfg, 1, 6);
  auto x = ag::parameter(testing::random_mat(rng, 16, 3, 1.0));
  const Mat proj = testing::random_mat(rng, 16, 3, 1.0);
  std::vector<std::pair<std::string, ag::Var>> leaves{{"x", x}};
  for (const auto& [name, v] : store.all())
    if (name.find(".bev") != std::string::npos) leaves.emplace_back(name, v);
  const auto result = testing::check_gradients(
      [&] {
        const BevMap out = bev_extract({x, 4, 4}, params.bev);
        return ag::sum(ag::mul(out.features, ag::constant(proj)));
      },
      leaves);
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst;
}

TEST(Decode, OutputCoordinatesEqualInputAndSkipsAlign) {
  Fixture fx(3, 4, 1);
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = random_tensor(gen, fx.rng, {32, 32, 8}, 20 + 15 * static_cast<std::size_t>(trial), 3);
    const Encoded e = encode(t, fx.params);
    for (int s = 0; s + 1 < 4; ++s) {
      std::set<Coord> coarse(e.scales[static_cast<std::size_t>(s + 1)].coords->begin(),
                             e.scales[static_cast<std::size_t>(s + 1)].coords->end());
      for (const Coord& c : *e.scales[static_cast<std::size_t>(s)].coords)
        EXPECT_TRUE(coarse.count({c.x / 2, c.y / 2, c.z / 2}));
      EXPECT_EQ(e.plans[static_cast<std::size_t>(s)].out_coords, *e.scales[static_cast<std::size_t>(s + 1)].coords);
    }
    const SparseTensor out = decode(e, e.scales[3], fx.params.decoder);
    EXPECT_EQ(*out.coords, *t.coords);
    EXPECT_EQ(out.shape, t.shape);
    EXPECT_EQ(out.channels(), 4);
  }
}

TEST(Decode, SingleVoxelRoundTrip) {
  Fixture fx(2, 4, 1);
  const auto t = SparseTensor::make({{7, 3, 5}}, ag::constant(Mat::Ones(1, 2)), {32, 32, 8});
  const Encoded e = encode(t, fx.params);
  const SparseTensor out = decode(e, e.scales[3], fx.params.decoder);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ((*out.coords)[0], (Coord{7, 3, 5}));
}

TEST(Decode, MismatchedInjectionIsRejected) {
  Fixture fx(2, 4, 1);
  std::mt19937_64 gen(6);
  const auto t = random_tensor(gen, fx.rng, {32, 32, 8}, 40, 2);
  const Encoded e = encode(t, fx.params);
  const auto wrong = SparseTensor::make({{0, 0, 0}}, ag::constant(Mat::Zero(1, 16)), {4, 4, 1});
  if (*wrong.coords != *e.scales[3].coords) EXPECT_THROW(decode(e, wrong, fx.params.decoder), Error);
}

TEST(BevProjection, GatherAfterProjectionIsIdentity) {
  Fixture fx(2, 4, 2);
  std::mt19937_64 gen(7);
  const auto t = random_tensor(gen, fx.rng, {4, 4, 2}, 12, 5);
  const BevMap bev = project_to_bev(t);
  EXPECT_EQ(bev.features.cols(), 10);
  const ag::Var back = sparse::gather_from_dense(sparse::height_expand(bev.features, t.shape), *t.coords, t.shape);
  EXPECT_EQ((back.value() - t.features.value()).cwiseAbs().maxCoeff(), 0.0);
  const auto cells = occupied_bev_cells(t);
  std::set<int> expect;
  for (const Coord& c : *t.coords) expect.insert(c.y * 4 + c.x);
  EXPECT_EQ(cells, std::vector<int>(expect.begin(), expect.end()));
}

TEST(AuxHead, LinearContract) {
  Fixture fx(2, 4, 1);
  const Mat f = testing::random_mat(fx.rng, 5, 16, 1.0);
  nn::Linear head = fx.params.aux_head;
  head.weight.mutable_value().setZero();
  EXPECT_EQ(aux_seg_head(ag::constant(f), head).value().cwiseAbs().maxCoeff(), 0.0);
  Mat sel = Mat::Zero(16, 6);
  for (int k = 0; k < 6; ++k) sel(2 * k, k) = 1.0;
  head.weight.mutable_value() = sel;
  const Mat logits = aux_seg_head(ag::constant(f), head).value();
  for (int k = 0; k < 6; ++k) EXPECT_EQ((logits.col(k) - f.col(2 * k)).cwiseAbs().maxCoeff(), 0.0);
  const Mat p = ag::softmax_rows(ag::constant(logits)).value();
  for (Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
}

TEST(Backbone, WholeNetworkGradientCheck) {
  BackboneConfig cfg;
  cfg.in_channels = 3;
  cfg.base_channels = 8;
  nn::ParamStore store;
  Rng rng(9);
  const auto params = make_backbone(store, rng, "bb", cfg, 1, 6);
  for (auto& [name, v] : store.all())
    if (name.ends_with(".gain") || name.ends_with("norm.bias"))
      v.mutable_value() = testing::random_mat(rng, v.rows(), v.cols(), 0.3).array() + (name.ends_with(".gain") ? 1.0 : 0.0);
  std::mt19937_64 gen(9);
  const SpatialShape shape{8, 8, 8};
  const auto coords = random_sites(gen, shape, 30);
  auto x = ag::parameter(testing::random_mat(rng, 30, 3, 1.0));
  const Mat proj = testing::random_mat(rng, 30, 8, 1.0);
  const Mat aux_proj = testing::random_mat(rng, 1, 6, 1.0);
  std::vector<std::pair<std::string, ag::Var>> leaves(store.all().begin(), store.all().end());
  leaves.emplace_back("x", x);
  testing::GradCheckOptions opts;
  opts.max_entries_per_tensor = 6;
  const auto result = testing::check_gradients(
      [&] {
        const auto t = SparseTensor::make(coords, x, shape);
        const Encoded e = encode(t, params);
        const BevMap bev = bev_extract(project_to_bev(e.scales[3]), params.bev);
        const ag::Var inj = sparse::gather_from_dense(
            sparse::height_expand(bev.features, e.scales[3].shape), *e.scales[3].coords, e.scales[3].shape);
        const SparseTensor out = decode(e, e.scales[3].with_features(inj), params.decoder);
        const ag::Var aux = aux_seg_head(ag::gather_rows(bev.features, occupied_bev_cells(e.scales[3])), params.aux_head);
        return ag::add(ag::sum(ag::mul(out.features, ag::constant(proj))),
                       ag::sum(ag::mul(aux, ag::constant(aux_proj))));
      },
      leaves, opts);
  EXPECT_LT(result.max_rel_error, 1e-3) << result.worst;
  EXPECT_GT(result.entries_checked, 100u);
}

}  // namespace
}  // namespace lmt::backbone
