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

// Sparse voxel tensors, rulebook convolutions and the exact mappings between
// sparse voxels, dense volumes and height-folded BEV maps.
//
// Layouts:
//   dense volume  (D*H*W) x C, row z*H*W + y*W + x
//   BEV map       (H*W) x (D*C), row y*W + x, column h*C + c (height-major)

#pragma once

#include <memory>
#include <span>
#include <vector>

#include "lidarmt/autograd.hpp"
#include "lidarmt/coord.hpp"

namespace lmt::sparse {

// Open-addressing hash from linear voxel index to row.
class CoordIndex {
 public:
  CoordIndex(std::span<const Coord> coords, SpatialShape shape);

  // Row holding c, or -1 when c is absent or outside the shape.
  int find(const Coord& c) const;
  std::size_t size() const { return count_; }

 private:
  std::size_t slot_of(std::int64_t key) const;

  SpatialShape shape_;
  std::vector<std::int64_t> keys_;  // -1 marks an empty slot
  std::vector<int> rows_;
  std::size_t mask_ = 0;
  std::size_t count_ = 0;
};

struct SparseTensor {
  std::shared_ptr<const std::vector<Coord>> coords;
  std::shared_ptr<const CoordIndex> index;
  ag::Var features;  // M x C
  SpatialShape shape;

  // Validates uniqueness and bounds.
  static SparseTensor make(std::vector<Coord> coords, ag::Var features, SpatialShape shape);
  SparseTensor with_features(ag::Var f) const;

  std::size_t size() const { return coords->size(); }
  ag::Index channels() const { return features.cols(); }
};

// Per kernel tap, the (input row, output row) pairs it connects.
struct Rulebook {
  int kernel_volume = 0;
  ag::Index n_in = 0;
  ag::Index n_out = 0;
  std::vector<std::vector<int>> in_rows;
  std::vector<std::vector<int>> out_rows;

  Rulebook transposed() const;
  std::size_t pair_count() const;
};

// Tap k of a 3x3x3 kernel covers offset (k%3-1, k/3%3-1, k/9-1).
inline constexpr int kKernel3d = 27;
Coord kernel_offset3d(int k);

// Output sites equal input sites.
Rulebook submanifold_rulebook(std::span<const Coord> coords, const CoordIndex& index,
                              SpatialShape shape);

// Stride-2, pad-1, 3x3x3 downsampling. Output sites are the distinct
// floor(c/2) of the inputs, in linear-index order; each output site sums
// every input inside its receptive field.
struct StridedPlan {
  std::vector<Coord> out_coords;
  SpatialShape out_shape;
  Rulebook rules;
};
StridedPlan strided_plan(std::span<const Coord> coords, SpatialShape shape);

// Dense 2-D 3x3 convolution over a w x h grid with pad 1 and the given
// stride; tap k covers offset (k%3-1, k/3-1).
Rulebook dense2d_rulebook(int w, int h, int stride);

// out[o] = bias + sum over taps k and pairs (i, o) of x[i] * W_k, where W_k
// is rows [k*Cin, (k+1)*Cin) of weight. bias may be undefined.
ag::Var rulebook_conv(const ag::Var& x, const ag::Var& weight, const ag::Var& bias,
                      const Rulebook& rules);

SparseTensor submanifold_conv3d(const SparseTensor& t, const ag::Var& weight,
                                const ag::Var& bias);
SparseTensor strided_conv3d(const SparseTensor& t, const ag::Var& weight, const ag::Var& bias);
SparseTensor strided_conv3d(const SparseTensor& t, const StridedPlan& plan,
                            const ag::Var& weight, const ag::Var& bias);
// Transposed counterpart of a strided plan: features on plan.out_coords
// are spread back onto the fine coordinate set the plan was built from.
SparseTensor inverse_conv3d(const SparseTensor& coarse, const SparseTensor& fine_template,
                            const StridedPlan& plan, const ag::Var& weight,
                            const ag::Var& bias);

ag::Var scatter_to_dense(const SparseTensor& t);
ag::Var gather_from_dense(const ag::Var& dense, std::span<const Coord> coords, SpatialShape shape);

ag::Var height_collapse(const ag::Var& dense, SpatialShape shape);
ag::Var height_expand(const ag::Var& bev, SpatialShape shape);

}  // namespace lmt::sparse
