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

#include "lidarmt/nn.hpp"

#include <cmath>

#include "lidarmt/error.hpp"

namespace lmt::nn {

Var ParamStore::create(const std::string& name, Mat init) {
  require(!contains(name), ErrorCode::kInternal, "duplicate parameter name: " + name);
  Var v = ag::parameter(std::move(init));
  params_.emplace(name, v);
  return v;
}

Var ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  require(it != params_.end(), ErrorCode::kInvalidArgument, "unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : params_) v.zero_grad();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : params_) n += static_cast<std::size_t>(v.rows() * v.cols());
  return n;
}

Mat uniform_init(Rng& rng, ag::Index rows, ag::Index cols, double bound) {
  Mat m(rows, cols);
  for (ag::Index i = 0; i < rows; ++i)
    for (ag::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

Linear make_linear(ParamStore& store, Rng& rng, const std::string& name, ag::Index in,
                   ag::Index out, bool with_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<ag::Index>(in, 1)));
  Linear l;
  l.weight = store.create(name + ".weight", uniform_init(rng, in, out, bound));
  if (with_bias) l.bias = store.create(name + ".bias", Mat::Zero(1, out));
  return l;
}

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, ag::Index dim) {
  LayerNorm n;
  n.gain = store.create(name + ".gain", Mat::Ones(1, dim));
  n.bias = store.create(name + ".bias", Mat::Zero(1, dim));
  return n;
}

FeedForward make_feed_forward(ParamStore& store, Rng& rng, const std::string& name,
                              ag::Index dim, ag::Index hidden) {
  return FeedForward{make_linear(store, rng, name + ".fc1", dim, hidden),
                     make_linear(store, rng, name + ".fc2", hidden, dim)};
}

}  // namespace lmt::nn
