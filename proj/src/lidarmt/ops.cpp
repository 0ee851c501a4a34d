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

#include "lidarmt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "lidarmt/error.hpp"

namespace lmt::ag {
namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kShapeMismatch,
          std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
              std::to_string(b.cols()) + ")");
}

using IndexList = std::shared_ptr<const std::vector<int>>;

IndexList copy_indices(std::span<const int> idx) {
  return std::make_shared<const std::vector<int>>(idx.begin(), idx.end());
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), ErrorCode::kShapeMismatch,
          "matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
              std::to_string(b.rows()));
  Mat out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (self.input_needs_grad(0))
      self.input_grad(0).noalias() += self.grad * self.input_value(1).transpose();
    if (self.input_needs_grad(1))
      self.input_grad(1).noalias() += self.input_value(0).transpose() * self.grad;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a.cols() == b.cols(), ErrorCode::kShapeMismatch, "matmul_nt: width mismatch");
  Mat out(a.rows(), b.rows());
  out.noalias() = a.value() * b.value().transpose();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (self.input_needs_grad(0))
      self.input_grad(0).noalias() += self.grad * self.input_value(1);
    if (self.input_needs_grad(1))
      self.input_grad(1).noalias() += self.grad.transpose() * self.input_value(0);
  });
}

Var transpose(const Var& a) {
  Mat out = a.value().transpose();
  return make_result(std::move(out), {a}, [](Node& self) {
    self.input_grad(0) += self.grad.transpose();
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    if (self.input_needs_grad(0)) self.input_grad(0) += self.grad;
    if (self.input_needs_grad(1)) self.input_grad(1) += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    if (self.input_needs_grad(0)) self.input_grad(0) += self.grad;
    if (self.input_needs_grad(1)) self.input_grad(1) -= self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Mat out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (self.input_needs_grad(0))
      self.input_grad(0) += self.grad.cwiseProduct(self.input_value(1));
    if (self.input_needs_grad(1))
      self.input_grad(1) += self.grad.cwiseProduct(self.input_value(0));
  });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& self) {
    self.input_grad(0) += self.grad * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Mat out = a.value().array() + s;
  return make_result(std::move(out), {a}, [](Node& self) {
    self.input_grad(0) += self.grad;
  });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::kShapeMismatch,
          "add_row: bias must be 1x" + std::to_string(a.cols()));
  Mat out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [](Node& self) {
    if (self.input_needs_grad(0)) self.input_grad(0) += self.grad;
    if (self.input_needs_grad(1)) self.input_grad(1) += self.grad.colwise().sum();
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  Var y = matmul(x, w);
  return b.defined() ? add_row(y, b) : y;
}

Var relu(const Var& a) {
  Mat out = a.value().unaryExpr([](double v) { return v > 0.0 || std::isnan(v) ? v : 0.0; });
  return make_result(std::move(out), {a}, [](Node& self) {
    self.input_grad(0).array() +=
        (self.input_value(0).array() > 0.0).select(self.grad.array(), 0.0);
  });
}

Var sigmoid(const Var& a) {
  Mat out = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  return make_result(std::move(out), {a}, [](Node& self) {
    const auto y = self.value.array();
    self.input_grad(0).array() += self.grad.array() * y * (1.0 - y);
  });
}

Var exp(const Var& a) {
  Mat out = a.value().array().exp().matrix();
  return make_result(std::move(out), {a}, [](Node& self) {
    self.input_grad(0).array() += self.grad.array() * self.value.array();
  });
}

Var log(const Var& a) {
  Mat out = a.value().array().log().matrix();
  return make_result(std::move(out), {a}, [](Node& self) {
    self.input_grad(0).array() += self.grad.array() / self.input_value(0).array();
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Mat out = a.value().unaryExpr([lo, hi](double v) { return std::isnan(v) ? v : std::clamp(v, lo, hi); });
  return make_result(std::move(out), {a}, [lo, hi](Node& self) {
    const auto x = self.input_value(0).array();
    self.input_grad(0).array() += (x >= lo && x <= hi).select(self.grad.array(), 0.0);
  });
}

namespace {

Mat softmax_of(const Mat& x, Index group) {
  Mat out(x.rows(), x.cols());
  const Index groups = x.cols() / group;
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index g = 0; g < groups; ++g) {
      auto in = x.row(r).segment(g * group, group);
      auto o = out.row(r).segment(g * group, group);
      const double m = in.maxCoeff();
      for (Index c = 0; c < group; ++c) o(c) = std::exp(in(c) - m);
      o /= o.sum();
    }
  }
  return out;
}

void softmax_backward(Node& self, Index group) {
  const Index groups = self.value.cols() / group;
  Mat& gin = self.input_grad(0);
  for (Index r = 0; r < self.value.rows(); ++r) {
    for (Index g = 0; g < groups; ++g) {
      auto y = self.value.row(r).segment(g * group, group);
      auto gy = self.grad.row(r).segment(g * group, group);
      const double dot = y.dot(gy);
      gin.row(r).segment(g * group, group).array() += y.array() * (gy.array() - dot);
    }
  }
}

}  // namespace

Var softmax_rows(const Var& a) { return softmax_groups(a, a.cols()); }

Var softmax_groups(const Var& a, Index group_size) {
  require(group_size > 0 && a.cols() % group_size == 0, ErrorCode::kShapeMismatch,
          "softmax_groups: width not divisible by group size");
  if (a.cols() == 0) return make_result(a.value(), {a}, [](Node&) {});
  return make_result(softmax_of(a.value(), group_size), {a},
                     [group_size](Node& self) { softmax_backward(self, group_size); });
}

Var log_softmax_rows(const Var& a) {
  Mat out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    const auto in = a.value().row(r);
    const double m = in.maxCoeff();
    const double lse = m + std::log((in.array() - m).exp().sum());
    out.row(r) = in.array() - lse;
  }
  return make_result(std::move(out), {a}, [](Node& self) {
    Mat& gin = self.input_grad(0);
    for (Index r = 0; r < self.value.rows(); ++r) {
      const double gs = self.grad.row(r).sum();
      gin.row(r).array() +=
          self.grad.row(r).array() - self.value.row(r).array().exp() * gs;
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Index n = x.cols();
  require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n,
          ErrorCode::kShapeMismatch, "layer_norm: gain/bias must be 1x" + std::to_string(n));
  auto normalized = std::make_shared<Mat>(x.rows(), n);
  auto inv_std = std::make_shared<Eigen::VectorXd>(x.rows());
  Mat out(x.rows(), n);
  for (Index r = 0; r < x.rows(); ++r) {
    const auto row = x.value().row(r);
    const double mu = row.mean();
    const double var = (row.array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)(r) = is;
    normalized->row(r) = (row.array() - mu) * is;
    out.row(r) = normalized->row(r).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
  }
  return make_result(std::move(out), {x, gain, bias}, [normalized, inv_std, n](Node& self) {
    const Mat& g = self.grad;
    if (self.input_needs_grad(1))
      self.input_grad(1) += g.cwiseProduct(*normalized).colwise().sum();
    if (self.input_needs_grad(2)) self.input_grad(2) += g.colwise().sum();
    if (self.input_needs_grad(0)) {
      Mat& gin = self.input_grad(0);
      const auto gamma = self.input_value(1).row(0);
      for (Index r = 0; r < g.rows(); ++r) {
        const RowVec gx = g.row(r).cwiseProduct(gamma);
        const double mean_g = gx.mean();
        const double mean_gx = gx.dot(normalized->row(r)) / static_cast<double>(n);
        gin.row(r).array() += (*inv_std)(r) * (gx.array() - mean_g -
                                               normalized->row(r).array() * mean_gx);
      }
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, ErrorCode::kShapeMismatch, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat out(rows, cols);
  auto offsets = std::make_shared<std::vector<Index>>();
  Index at = 0;
  for (const auto& p : parts) {
    offsets->push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      if (!self.input_needs_grad(i)) continue;
      self.input_grad(i) += self.grad.middleCols((*offsets)[i], self.input_value(i).cols());
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, ErrorCode::kShapeMismatch, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat out(rows, cols);
  auto offsets = std::make_shared<std::vector<Index>>();
  Index at = 0;
  for (const auto& p : parts) {
    offsets->push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      if (!self.input_needs_grad(i)) continue;
      self.input_grad(i) += self.grad.middleRows((*offsets)[i], self.input_value(i).rows());
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorCode::kShapeMismatch,
          "slice_cols: range out of bounds");
  Mat out = a.value().middleCols(start, count);
  return make_result(std::move(out), {a}, [start, count](Node& self) {
    self.input_grad(0).middleCols(start, count) += self.grad;
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), ErrorCode::kShapeMismatch,
          "slice_rows: range out of bounds");
  Mat out = a.value().middleRows(start, count);
  return make_result(std::move(out), {a}, [start, count](Node& self) {
    self.input_grad(0).middleRows(start, count) += self.grad;
  });
}

Var gather_rows(const Var& a, std::span<const int> rows) {
  auto idx = copy_indices(rows);
  Mat out = Mat::Zero(static_cast<Index>(idx->size()), a.cols());
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const int r = (*idx)[i];
    require(r < a.rows(), ErrorCode::kOutOfRange, "gather_rows: row index out of range");
    if (r >= 0) out.row(static_cast<Index>(i)) = a.value().row(r);
  }
  return make_result(std::move(out), {a}, [idx](Node& self) {
    Mat& gin = self.input_grad(0);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const int r = (*idx)[i];
      if (r >= 0) gin.row(r) += self.grad.row(static_cast<Index>(i));
    }
  });
}

Var scatter_add_rows(const Var& a, std::span<const int> rows, Index n_out) {
  require(static_cast<Index>(rows.size()) == a.rows(), ErrorCode::kShapeMismatch,
          "scatter_add_rows: one target per input row required");
  auto idx = copy_indices(rows);
  Mat out = Mat::Zero(n_out, a.cols());
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const int r = (*idx)[i];
    require(r < n_out, ErrorCode::kOutOfRange, "scatter_add_rows: target out of range");
    if (r >= 0) out.row(r) += a.value().row(static_cast<Index>(i));
  }
  return make_result(std::move(out), {a}, [idx](Node& self) {
    Mat& gin = self.input_grad(0);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const int r = (*idx)[i];
      if (r >= 0) gin.row(static_cast<Index>(i)) += self.grad.row(r);
    }
  });
}

Var segment_max(const Var& a, std::span<const int> segment, Index n_segments) {
  require(static_cast<Index>(segment.size()) == a.rows(), ErrorCode::kShapeMismatch,
          "segment_max: one segment id per row required");
  const Index c = a.cols();
  Mat out = Mat::Constant(n_segments, c, -std::numeric_limits<double>::infinity());
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n_segments * c), -1);
  for (Index r = 0; r < a.rows(); ++r) {
    const int s = segment[static_cast<std::size_t>(r)];
    require(s >= 0 && s < n_segments, ErrorCode::kOutOfRange, "segment_max: bad segment id");
    for (Index k = 0; k < c; ++k) {
      const double v = a.value()(r, k);
      if (v > out(s, k) || (std::isnan(v) && !std::isnan(out(s, k)))) {
        out(s, k) = v;
        (*argmax)[static_cast<std::size_t>(s * c + k)] = static_cast<int>(r);
      }
    }
  }
  for (Index s = 0; s < n_segments; ++s)
    for (Index k = 0; k < c; ++k)
      if ((*argmax)[static_cast<std::size_t>(s * c + k)] < 0) out(s, k) = 0.0;
  return make_result(std::move(out), {a}, [argmax, c](Node& self) {
    Mat& gin = self.input_grad(0);
    for (Index s = 0; s < self.value.rows(); ++s)
      for (Index k = 0; k < c; ++k) {
        const int r = (*argmax)[static_cast<std::size_t>(s * c + k)];
        if (r >= 0) gin(r, k) += self.grad(s, k);
      }
  });
}

Var sum(const Var& a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& self) {
    self.input_grad(0).array() += self.grad(0, 0);
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(std::max<Index>(a.rows() * a.cols(), 1));
  return scale(sum(a), 1.0 / n);
}

}  // namespace lmt::ag
