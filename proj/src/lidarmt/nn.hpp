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
#include <map>
#include <string>

#include "lidarmt/autograd.hpp"
#include "lidarmt/ops.hpp"
#include "lidarmt/random.hpp"

namespace lmt::nn {

using ag::Mat;
using ag::Var;

// Owns every learnable tensor under a stable hierarchical name such as
// "backbone.enc1.subm0.weight". Iteration order is lexicographic.
class ParamStore {
 public:
  Var create(const std::string& name, Mat init);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const std::map<std::string, Var>& all() const { return params_; }
  std::map<std::string, Var>& all() { return params_; }

  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::map<std::string, Var> params_;
};

Mat uniform_init(Rng& rng, ag::Index rows, ag::Index cols, double bound);

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out, may be undefined

  Var operator()(const Var& x) const { return ag::linear(x, weight, bias); }
  ag::Index in_features() const { return weight.rows(); }
  ag::Index out_features() const { return weight.cols(); }
};

Linear make_linear(ParamStore& store, Rng& rng, const std::string& name, ag::Index in,
                   ag::Index out, bool with_bias = true);

struct LayerNorm {
  Var gain;
  Var bias;

  Var operator()(const Var& x) const { return ag::layer_norm(x, gain, bias); }
};

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, ag::Index dim);

// Two-layer position-wise feed-forward block with a rectified hidden layer.
struct FeedForward {
  Linear fc1;
  Linear fc2;

  Var operator()(const Var& x) const { return fc2(ag::relu(fc1(x))); }
};

FeedForward make_feed_forward(ParamStore& store, Rng& rng, const std::string& name,
                              ag::Index dim, ag::Index hidden);

}  // namespace lmt::nn
