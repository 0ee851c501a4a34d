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

// Minimal tape-free reverse-mode differentiation over dense row-major
// matrices. Every value is a 2-D double matrix; scalars are 1x1.
// Graphs are built implicitly by the ops in ops.hpp and released when the
// last Var referencing a node goes out of scope.

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace lmt::ag {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

struct Node {
  Mat value;
  Mat grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Mat& grad_buffer() {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
    return grad;
  }
  bool input_needs_grad(std::size_t i) const { return inputs[i]->requires_grad; }
  Mat& input_grad(std::size_t i) { return inputs[i]->grad_buffer(); }
  const Mat& input_value(std::size_t i) const { return inputs[i]->value; }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Mat& value() const { return node_->value; }
  // Direct access for optimizers and finite-difference probes only.
  Mat& mutable_value() { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Mat value);
Var parameter(Mat value);

// Gradient recording is on by default; NoGradGuard disables it on the
// current thread for inference and finite-difference probes.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds a result node. The backward closure receives the result node and
// must accumulate into inputs via Node::input_grad.
Var make_result(Mat value, std::vector<Var> inputs,
                std::function<void(Node&)> backward);

// Seeds d(root)/d(root) = 1 and propagates to every reachable leaf.
// Gradients accumulate into existing leaf buffers.
void backward(const Var& root);

}  // namespace lmt::ag
