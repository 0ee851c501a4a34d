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

#include <cmath>
#include <random>
#include <set>

#include "lidarmt/error.hpp"
#include "lidarmt/ops.hpp"
#include "lidarmt/xsf.hpp"
#include "support/gradcheck.hpp"

namespace lmt::xsf {
namespace {

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Textbook form: f(u,v) = sum over the four integer neighbours of
// f(x,y) * (1 - |u - x|) * (1 - |v - y|), zero outside the grid.
ag::RowVec bilinear_oracle(const Mat& map, int w, int h, double u, double v) {
  ag::RowVec out = ag::RowVec::Zero(map.cols());
  for (int y = static_cast<int>(std::floor(v)); y <= static_cast<int>(std::floor(v)) + 1; ++y)
    for (int x = static_cast<int>(std::floor(u)); x <= static_cast<int>(std::floor(u)) + 1; ++x) {
      if (x < 0 || y < 0 || x >= w || y >= h) continue;
      const double k = std::max(0.0, 1 - std::abs(u - x)) * std::max(0.0, 1 - std::abs(v - y));
      out += k * map.row(y * w + x);
    }
  return out;
}

void zero_linear(nn::Linear& l) {
  l.weight.mutable_value().setZero();
  if (l.bias.defined()) l.bias.mutable_value().setZero();
}

TEST(Bilinear, IntegerLocationReadsStoredValue) {
  Rng rng(1);
  const Mat m = testing::random_mat(rng, 12, 3, 1.0);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x)
      EXPECT_EQ(max_abs(bilinear_sample(m, 4, 3, x, y) - m.row(y * 4 + x)), 0.0);
}

TEST(Bilinear, MidpointIsMeanOfFour) {
  Mat m(4, 1);
  m << 1, 2, 3, 10;
  EXPECT_DOUBLE_EQ(bilinear_sample(m, 2, 2, 0.5, 0.5)(0), 4.0);
}

TEST(Bilinear, RandomLocationsMatchFormulaOracle) {
  Rng rng(2);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1.5, 6.5), v(-1.5, 5.5);
  const Mat m = testing::random_mat(rng, 30, 4, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double a = u(gen), b = v(gen);
    EXPECT_LT(max_abs(bilinear_sample(m, 6, 5, a, b) - bilinear_oracle(m, 6, 5, a, b)), 1e-14);
  }
  EXPECT_EQ(max_abs(bilinear_sample(m, 6, 5, -3.0, 1.0)), 0.0);
}

TEST(DeformSample, MatchesPerSampleOracleAndGradients) {
  Rng rng(3);
  std::mt19937_64 gen(3);
  const SampleGeometry g{4, 3, 2, 2, 3, 2};
  const Index plane = 12;
  auto values = ag::parameter(testing::random_mat(rng, plane * 2, 4, 1.0));
  Mat l(5, 2 * g.n_samples());
  std::uniform_int_distribution<int> cell(-1, 4);
  std::uniform_real_distribution<double> frac(0.15, 0.85);
  for (Index r = 0; r < l.rows(); ++r)
    for (Index c = 0; c < l.cols(); ++c) l(r, c) = cell(gen) + frac(gen);
  auto locs = ag::parameter(l);
  auto weights = ag::parameter(testing::random_mat(rng, 5, g.n_samples(), 1.0));
  const Mat out = deform_sample(values, locs, weights, g).value();
  for (Index r = 0; r < 5; ++r)
    for (int i = 0; i < g.n_head; ++i) {
      ag::RowVec e = ag::RowVec::Zero(g.head_dim);
      for (int j = 0; j < g.n_height; ++j)
        for (int p = 0; p < g.n_point; ++p) {
          const Index s = (i * g.n_height + j) * g.n_point + p;
          const Mat slice = values.value().middleRows(j * plane, plane).middleCols(i * g.head_dim, g.head_dim);
          e += weights.value()(r, s) * bilinear_oracle(slice, 4, 3, l(r, 2 * s), l(r, 2 * s + 1));
        }
      EXPECT_LT(max_abs(out.row(r).segment(i * g.head_dim, g.head_dim) - e), 1e-13);
    }
  const Mat proj = testing::random_mat(rng, 5, 4, 1.0);
  const auto res = testing::check_gradients(
      [&] { return ag::sum(ag::mul(deform_sample(values, locs, weights, g), ag::constant(proj))); },
      {{"values", values}, {"locs", locs}, {"weights", weights}});
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
}

struct AttnFixture {
  nn::ParamStore store;
  Rng rng{4};
  DeformAttnParams p;
  AttnFixture(Index dim, int heads, int heights, int points, Index hd) {
    p = make_deform_attn(store, rng, "attn", dim, heads, heights, points, hd);
  }
};

TEST(DeformAttn, InitialisationIsUniformWithStarOffsets) {
  AttnFixture fx(8, 4, 2, 4, 2);
  Rng rng(5);
  const Var q = ag::constant(testing::random_mat(rng, 3, 8, 1.0));
  const Mat refs = Mat::Constant(3, 2, 2.0);
  const auto o = mh_deform_attn(q, refs, ag::constant(testing::random_mat(rng, 2 * 25, 8, 1.0)), 5, 5, fx.p);
  EXPECT_LT(max_abs(o.weights.array() - 1.0 / 8.0), 1e-12);
  for (Index r = 1; r < 3; ++r) EXPECT_EQ(max_abs(o.offsets.row(r) - o.offsets.row(0)), 0.0);
  std::set<std::pair<long, long>> dirs;
  for (int i = 0; i < 4; ++i) {
    const Index s = i * 2 * 4;
    const double du = o.offsets(0, 2 * s), dv = o.offsets(0, 2 * s + 1);
    EXPECT_NEAR(std::hypot(du, dv), 0.25, 1e-12);
    dirs.insert({std::lround(4 * du), std::lround(4 * dv)});
  }
  EXPECT_EQ(dirs.size(), 4u);
}

TEST(DeformAttn, ZeroOffsetsUniformWeightsReduceToHeightMean) {
  AttnFixture fx(6, 3, 3, 2, 4);
  zero_linear(fx.p.offset_gen);
  Rng rng(6);
  fx.p.value_proj.bias.mutable_value() = testing::random_mat(rng, 1, 12, 1.0);
  fx.p.out_proj.bias.mutable_value() = testing::random_mat(rng, 1, 6, 1.0);
  const int w = 4, h = 3;
  const Mat vol = testing::random_mat(rng, 3 * 12, 6, 1.0);
  const Mat q = testing::random_mat(rng, 5, 6, 1.0);
  Mat refs(5, 2);
  refs << 0, 0, 3, 2, 1, 1, 2, 0, 3, 1;
  const auto o = mh_deform_attn(ag::constant(q), refs, ag::constant(vol), w, h, fx.p);
  for (Index r = 0; r < 5; ++r) {
    const int cell = static_cast<int>(refs(r, 1)) * w + static_cast<int>(refs(r, 0));
    ag::RowVec mean = ag::RowVec::Zero(6);
    for (int j = 0; j < 3; ++j) mean += vol.row(j * 12 + cell) / 3.0;
    const ag::RowVec expect =
        (mean * fx.p.value_proj.weight.value() + fx.p.value_proj.bias.value()) * fx.p.out_proj.weight.value() +
        fx.p.out_proj.bias.value();
    EXPECT_LT(max_abs(o.out.value().row(r) - expect), 1e-12);
  }
}

TEST(DeformAttn, SingleHeadHeightPointHandExpansion) {
  AttnFixture fx(3, 1, 1, 1, 2);
  Rng rng(7);
  fx.p.offset_gen.weight.mutable_value() = testing::random_mat(rng, 3, 2, 0.3);
  fx.p.offset_gen.bias.mutable_value() << 0.4, -0.3;
  fx.p.weight_gen.weight.mutable_value() = testing::random_mat(rng, 3, 1, 1.0);
  const Mat vol = testing::random_mat(rng, 20, 3, 1.0);
  const Mat q = testing::random_mat(rng, 1, 3, 1.0);
  Mat refs(1, 2);
  refs << 2, 1;
  const auto o = mh_deform_attn(ag::constant(q), refs, ag::constant(vol), 5, 4, fx.p);
  const ag::RowVec d = q * fx.p.offset_gen.weight.value() + fx.p.offset_gen.bias.value();
  const ag::RowVec x = bilinear_oracle(vol, 5, 4, 2 + d(0), 1 + d(1));
  const ag::RowVec expect = (x * fx.p.value_proj.weight.value() + fx.p.value_proj.bias.value()) *
                                fx.p.out_proj.weight.value() + fx.p.out_proj.bias.value();
  EXPECT_DOUBLE_EQ(o.weights(0, 0), 1.0);
  EXPECT_LT(max_abs(o.out.value() - expect), 1e-13);
}

TEST(DeformAttn, EqualLogitsGiveUniformWeights) {
  AttnFixture fx(4, 2, 2, 3, 2);
  Rng rng(8);
  fx.p.weight_gen.bias.mutable_value().setConstant(0.7);
  const auto o = mh_deform_attn(ag::constant(testing::random_mat(rng, 4, 4, 1.0)), Mat::Zero(4, 2),
                                ag::constant(testing::random_mat(rng, 2 * 9, 4, 1.0)), 3, 3, fx.p);
  EXPECT_LT(max_abs(o.weights.array() - 1.0 / 6.0), 1e-6);
}

TEST(DeformAttn, GradientsMatchFiniteDifferences) {
  AttnFixture fx(4, 2, 2, 2, 3);
  Rng rng(9);
  fx.p.offset_gen.weight.mutable_value() = testing::random_mat(rng, 4, 16, 0.03);
  fx.p.offset_gen.bias.mutable_value().setConstant(0.5);
  fx.p.weight_gen.weight.mutable_value() = testing::random_mat(rng, 4, 8, 0.5);
  fx.p.weight_gen.bias.mutable_value() = testing::random_mat(rng, 1, 8, 0.5);
  auto q = ag::parameter(testing::random_mat(rng, 5, 4, 1.0));
  auto vol = ag::parameter(testing::random_mat(rng, 2 * 16, 4, 1.0));
  Mat refs(5, 2);
  refs << 0, 0, 1, 2, 2, 1, 3, 3, 1, 0;
  const Mat proj = testing::random_mat(rng, 5, 4, 1.0);
  std::vector<std::pair<std::string, ag::Var>> leaves(fx.store.all().begin(), fx.store.all().end());
  leaves.emplace_back("queries", q);
  leaves.emplace_back("maps", vol);
  const auto res = testing::check_gradients(
      [&] {
        const auto o = mh_deform_attn(q, refs, vol, 4, 4, fx.p);
        for (Index r = 0; r < o.offsets.rows(); ++r)
          for (Index c = 0; c < o.offsets.cols(); ++c) {
            const double frac = o.offsets(r, c) - std::floor(o.offsets(r, c));
            EXPECT_GT(frac, 0.1);
            EXPECT_LT(frac, 0.9);
          }
        return ag::sum(ag::mul(o.out, ag::constant(proj)));
      },
      leaves);
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

XsfConfig small_config(int blocks = 2) {
  XsfConfig c;
  c.blocks = blocks;
  c.n_head = 2;
  c.n_point = 2;
  c.head_dim = 3;
  c.ffn_dim = 8;
  return c;
}

TEST(DenseToSparse, ZeroResidualBranchesPassGatheredFeatures) {
  nn::ParamStore store;
  Rng rng(10);
  XsfParams p = make_xsf(store, rng, "d2s", 4, 2, 0, small_config());
  for (auto& b : p.blocks) {
    zero_linear(b.attn.out_proj);
    zero_linear(b.ffn.fc2);
  }
  const SpatialShape shape{3, 3, 2};
  const Mat bev = testing::random_mat(rng, 9, 8, 1.0);
  const std::vector<Coord> coords{{0, 0, 0}, {2, 1, 1}, {1, 2, 0}};
  const Var out = dense_to_sparse_xsf(ag::constant(bev), coords, shape, p);
  ASSERT_EQ(out.rows(), 3);
  const Mat expect = sparse::gather_from_dense(sparse::height_expand(ag::constant(bev), shape), coords, shape).value();
  EXPECT_EQ(max_abs(out.value() - expect), 0.0);
}

TEST(DenseToSparse, ZeroOffsetsSeeOnlyTheOwnColumn) {
  nn::ParamStore store;
  Rng rng(11);
  XsfParams p = make_xsf(store, rng, "d2s", 4, 2, 0, small_config(1));
  zero_linear(p.blocks[0].attn.offset_gen);
  const SpatialShape shape{5, 5, 2};
  Mat bev = testing::random_mat(rng, 25, 8, 1.0);
  const std::vector<Coord> coords{{2, 2, 1}};
  const Mat a = dense_to_sparse_xsf(ag::constant(bev), coords, shape, p).value();
  Mat far = bev;
  for (int cell = 0; cell < 25; ++cell)
    if (cell != 12) far.row(cell).setZero();
  const Mat b = dense_to_sparse_xsf(ag::constant(far), coords, shape, p).value();
  EXPECT_LT(max_abs(a - b), 1e-14);
  far.row(12).array() += 1.0;
  const Mat c = dense_to_sparse_xsf(ag::constant(far), coords, shape, p).value();
  EXPECT_GT(max_abs(a - c), 1e-6);
}

TEST(DenseToSparse, OutOfRangeCoordinateIsRejected) {
  nn::ParamStore store;
  Rng rng(12);
  XsfParams p = make_xsf(store, rng, "d2s", 4, 1, 0, small_config());
  const std::vector<Coord> coords{{3, 0, 0}};
  EXPECT_THROW(dense_to_sparse_xsf(ag::constant(Mat::Zero(9, 4)), coords, {3, 3, 1}, p), Error);
}

TEST(SparseToDense, EmptyInputGivesZeroMapOfRightShape) {
  nn::ParamStore store;
  Rng rng(13);
  XsfParams p = make_xsf(store, rng, "s2d", 4, 2, 12, small_config());
  const auto t = sparse::SparseTensor::make({}, ag::constant(Mat::Zero(0, 4)), {4, 3, 2});
  const Var out = sparse_to_dense_xsf(t, p);
  EXPECT_EQ(out.rows(), 12);
  EXPECT_EQ(out.cols(), 8);
  EXPECT_EQ(max_abs(out.value()), 0.0);
}

TEST(SparseToDense, DegenerateAttentionIsProjectedHeightMean) {
  nn::ParamStore store;
  Rng rng(14);
  XsfParams p = make_xsf(store, rng, "s2d", 4, 2, 12, small_config(1));
  XsfBlock& b = p.blocks[0];
  zero_linear(b.attn.offset_gen);
  zero_linear(b.ffn.fc2);
  const SpatialShape shape{4, 3, 2};
  const std::vector<Coord> coords{{0, 0, 0}, {1, 2, 1}, {3, 1, 0}, {3, 1, 1}};
  const Mat f = testing::random_mat(rng, 4, 4, 1.0);
  const auto t = sparse::SparseTensor::make(coords, ag::constant(f), shape);
  const Mat out = sparse_to_dense_xsf(t, p).value();
  const Mat x = sparse::scatter_to_dense(t).value();
  const Mat n = b.norm_attn(ag::constant(x)).value();
  for (int cell = 0; cell < 12; ++cell) {
    const ag::RowVec mean = 0.5 * (n.row(cell) + n.row(12 + cell));
    const ag::RowVec attn = (mean * b.attn.value_proj.weight.value() + b.attn.value_proj.bias.value()) *
                                b.attn.out_proj.weight.value() + b.attn.out_proj.bias.value();
    for (int j = 0; j < 2; ++j)
      EXPECT_LT(max_abs(out.row(cell).segment(4 * j, 4) - (x.row(j * 12 + cell) + attn)), 1e-12);
  }
}

TEST(SparseToDense, TraceCoversEverySamplingPoint) {
  nn::ParamStore store;
  Rng rng(15);
  XsfParams p = make_xsf(store, rng, "s2d", 4, 2, 12, small_config());
  const auto t = sparse::SparseTensor::make({{1, 1, 1}}, ag::constant(Mat::Ones(1, 4)), {4, 3, 2});
  OffsetTrace trace;
  sparse_to_dense_xsf(t, p, &trace);
  ASSERT_EQ(trace.blocks.size(), 2u);
  for (const auto& blk : trace.blocks) {
    EXPECT_EQ(blk.refs.rows(), 24);
    EXPECT_EQ(blk.weights.size(), 24 * 2 * 2 * 2);
    EXPECT_EQ(blk.offsets.size(), 2 * blk.weights.size());
    EXPECT_TRUE(blk.offsets.allFinite());
  }
}

TEST(Xsf, BothDirectionsGradientCheck) {
  nn::ParamStore store;
  Rng rng(16);
  XsfParams s2d = make_xsf(store, rng, "s2d", 3, 2, 9, small_config(1));
  XsfParams d2s = make_xsf(store, rng, "d2s", 3, 2, 0, small_config(1));
  for (auto* p : {&s2d, &d2s}) {
    auto& a = p->blocks[0].attn;
    a.offset_gen.weight.mutable_value() = testing::random_mat(rng, 3, a.offset_gen.out_features(), 0.02);
    a.offset_gen.bias.mutable_value().setConstant(0.45);
    a.weight_gen.weight.mutable_value() = testing::random_mat(rng, 3, a.weight_gen.out_features(), 0.5);
  }
  const SpatialShape shape{3, 3, 2};
  const std::vector<Coord> coords{{0, 0, 0}, {1, 1, 1}, {2, 0, 1}, {2, 2, 0}};
  auto f = ag::parameter(testing::random_mat(rng, 4, 3, 1.0));
  const Mat proj = testing::random_mat(rng, 4, 3, 1.0);
  std::vector<std::pair<std::string, ag::Var>> leaves(store.all().begin(), store.all().end());
  leaves.emplace_back("features", f);
  const auto res = testing::check_gradients(
      [&] {
        const auto t = sparse::SparseTensor::make(coords, f, shape);
        const Var bev = sparse_to_dense_xsf(t, s2d);
        return ag::sum(ag::mul(dense_to_sparse_xsf(bev, coords, shape, d2s), ag::constant(proj)));
      },
      leaves);
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

}  // namespace
}  // namespace lmt::xsf
