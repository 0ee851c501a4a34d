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

#include "lidarmt/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lidarmt/error.hpp"
#include "lidarmt/ops.hpp"
#include "lidarmt/sparse.hpp"

namespace lmt::tasks {

namespace {

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace

int gaussian_radius(const data::Box& box, const BevGrid& grid) {
  const double half = 0.5 * std::hypot(box.size[0] / grid.cell_x, box.size[1] / grid.cell_y);
  return std::max(1, static_cast<int>(std::floor(half)));
}

DetectionTargets encode_targets(std::span<const data::Box> boxes, const BevGrid& grid, int k_thing) {
  const Index cells = static_cast<Index>(grid.w) * grid.h;
  DetectionTargets t;
  t.heatmap = Mat::Zero(cells, k_thing);
  t.reg = Mat::Zero(cells, kRegChannels);
  for (const data::Box& b : boxes) {
    require(b.class_id >= 1 && b.class_id <= k_thing, ErrorCode::kInvalidArgument,
            "encode_targets: box class outside the thing range");
    const double gx = (b.center[0] - grid.min_x) / grid.cell_x;
    const double gy = (b.center[1] - grid.min_y) / grid.cell_y;
    const int cx = static_cast<int>(std::floor(gx)), cy = static_cast<int>(std::floor(gy));
    if (cx < 0 || cy < 0 || cx >= grid.w || cy >= grid.h) continue;
    const int r = gaussian_radius(b, grid);
    const double sigma = (2.0 * r + 1.0) / 6.0;
    const int k = b.class_id - 1;
    for (int y = std::max(0, cy - r); y <= std::min(grid.h - 1, cy + r); ++y)
      for (int x = std::max(0, cx - r); x <= std::min(grid.w - 1, cx + r); ++x) {
        const double d2 = static_cast<double>((x - cx) * (x - cx) + (y - cy) * (y - cy));
        double& v = t.heatmap(y * grid.w + x, k);
        v = std::max(v, std::exp(-d2 / (2.0 * sigma * sigma)));
      }
    const int cell = cy * grid.w + cx;
    if (std::find(t.center_cells.begin(), t.center_cells.end(), cell) != t.center_cells.end()) continue;
    t.center_cells.push_back(cell);
    t.reg.row(cell) << gx - cx, gy - cy, b.center[2], std::log(b.size[0]), std::log(b.size[1]),
        std::log(b.size[2]), std::sin(b.yaw), std::cos(b.yaw);
  }
  return t;
}

std::vector<ScoredBox> decode_boxes(const Mat& heatmap, const Mat& reg, const BevGrid& grid,
                                    double threshold, int max_boxes) {
  const Index cells = static_cast<Index>(grid.w) * grid.h;
  require(heatmap.rows() == cells && reg.rows() == cells && reg.cols() == kRegChannels,
          ErrorCode::kShapeMismatch, "decode_boxes: heatmap/regression shape does not match the grid");
  struct Peak {
    double score;
    int key;
  };
  std::vector<Peak> peaks;
  for (Index k = 0; k < heatmap.cols(); ++k)
    for (int y = 0; y < grid.h; ++y)
      for (int x = 0; x < grid.w; ++x) {
        const double s = heatmap(y * grid.w + x, k);
        if (!(s > threshold)) continue;
        bool peak = true;
        for (int yy = std::max(0, y - 1); yy <= std::min(grid.h - 1, y + 1) && peak; ++yy)
          for (int xx = std::max(0, x - 1); xx <= std::min(grid.w - 1, x + 1); ++xx)
            if (heatmap(yy * grid.w + xx, k) > s) {
              peak = false;
              break;
            }
        if (peak) peaks.push_back({s, static_cast<int>(k * cells) + y * grid.w + x});
      }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.score != b.score ? a.score > b.score : a.key < b.key;
  });
  if (static_cast<int>(peaks.size()) > max_boxes) peaks.resize(static_cast<std::size_t>(std::max(0, max_boxes)));
  std::vector<ScoredBox> out;
  for (const Peak& p : peaks) {
    const int cell = p.key % static_cast<int>(cells);
    const int x = cell % grid.w, y = cell / grid.w;
    const auto r = reg.row(cell);
    ScoredBox sb;
    sb.score = p.score;
    sb.box.class_id = p.key / static_cast<int>(cells) + 1;
    sb.box.center = {static_cast<float>((x + r(0)) * grid.cell_x + grid.min_x),
                     static_cast<float>((y + r(1)) * grid.cell_y + grid.min_y), static_cast<float>(r(2))};
    sb.box.size = {static_cast<float>(std::exp(r(3))), static_cast<float>(std::exp(r(4))),
                   static_cast<float>(std::exp(r(5)))};
    sb.box.yaw = static_cast<float>(wrap_angle(std::atan2(r(6), r(7))));
    out.push_back(sb);
  }
  return out;
}

Var focal_heatmap_loss(const Var& pred, const Mat& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorCode::kShapeMismatch,
          "focal_heatmap_loss: prediction and target shapes differ");
  const Var p = ag::clamp(pred, kProbClamp, 1.0 - kProbClamp);
  const Mat& pv = p.value();
  double num_pos = 0, total = 0;
  Mat dp(pv.rows(), pv.cols());
  for (Index i = 0; i < pv.size(); ++i) {
    const double x = pv.data()[i], t = target.data()[i];
    if (t == 1.0) {
      num_pos += 1;
      total += -std::pow(1 - x, kFocalAlpha) * std::log(x);
      dp.data()[i] = kFocalAlpha * std::pow(1 - x, kFocalAlpha - 1) * std::log(x) - std::pow(1 - x, kFocalAlpha) / x;
    } else {
      const double wneg = std::pow(1 - t, kFocalBeta);
      total += -wneg * std::pow(x, kFocalAlpha) * std::log(1 - x);
      dp.data()[i] = -wneg * (kFocalAlpha * std::pow(x, kFocalAlpha - 1) * std::log(1 - x) -
                              std::pow(x, kFocalAlpha) / (1 - x));
    }
  }
  const double norm = std::max(1.0, num_pos);
  Mat out(1, 1);
  out(0, 0) = total / norm;
  dp /= norm;
  return ag::make_result(std::move(out), {p}, [dp = std::move(dp)](ag::Node& self) {
    self.input_grad(0) += self.grad(0, 0) * dp;
  });
}

Var l1_box_loss(const Var& pred, const Mat& target, std::span<const int> cells) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorCode::kShapeMismatch,
          "l1_box_loss: prediction and target shapes differ");
  if (cells.empty()) return ag::constant(Mat::Zero(1, 1));
  const std::vector<int> rows(cells.begin(), cells.end());
  const Mat tgt = ag::gather_rows(ag::constant(target), rows).value();
  const Var diff = ag::sub(ag::gather_rows(pred, rows), ag::constant(tgt));
  const Mat& d = diff.value();
  Mat out(1, 1);
  const double n = static_cast<double>(d.size());
  out(0, 0) = d.cwiseAbs().sum() / n;
  return ag::make_result(std::move(out), {diff}, [n](ag::Node& self) {
    const Mat& d = self.input_value(0);
    self.input_grad(0) += (self.grad(0, 0) / n) * d.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
  });
}

Var ce_loss(const Var& logits, std::span<const int> labels) {
  require(static_cast<Index>(labels.size()) == logits.rows(), ErrorCode::kShapeMismatch,
          "ce_loss: one label per row is required");
  if (labels.empty()) return ag::constant(Mat::Zero(1, 1));
  const Var ls = ag::log_softmax_rows(logits);
  Mat pick = Mat::Zero(ls.rows(), ls.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < ls.cols(), ErrorCode::kInvalidArgument, "ce_loss: label out of range");
    pick(static_cast<Index>(i), labels[i]) = -1.0 / static_cast<double>(labels.size());
  }
  return ag::sum(ag::mul(ls, ag::constant(std::move(pick))));
}

Var lovasz_softmax(const Var& probs, std::span<const int> labels) {
  const Index m = probs.rows(), k = probs.cols();
  require(static_cast<Index>(labels.size()) == m, ErrorCode::kShapeMismatch,
          "lovasz_softmax: one label per row is required");
  const Mat& p = probs.value();
  Mat grad = Mat::Zero(m, k);
  double total = 0;
  int present = 0;
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::vector<double> err(static_cast<std::size_t>(m));
  for (Index c = 0; c < k; ++c) {
    double gts = 0;
    for (Index i = 0; i < m; ++i) gts += labels[static_cast<std::size_t>(i)] == c;
    if (gts == 0) continue;
    ++present;
    for (Index i = 0; i < m; ++i) {
      const bool fg = labels[static_cast<std::size_t>(i)] == c;
      err[static_cast<std::size_t>(i)] = fg ? 1.0 - p(i, c) : p(i, c);
    }
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return err[static_cast<std::size_t>(a)] > err[static_cast<std::size_t>(b)];
    });
    double cum_fg = 0, cum_bg = 0, prev = 0;
    for (Index r = 0; r < m; ++r) {
      const Index i = order[static_cast<std::size_t>(r)];
      const bool fg = labels[static_cast<std::size_t>(i)] == c;
      (fg ? cum_fg : cum_bg) += 1;
      const double jac = 1.0 - (gts - cum_fg) / (gts + cum_bg);
      const double g = jac - prev;
      prev = jac;
      total += err[static_cast<std::size_t>(i)] * g;
      grad(i, c) += fg ? -g : g;
    }
  }
  Mat out(1, 1);
  out(0, 0) = present ? total / present : 0.0;
  if (present) grad /= present;
  return ag::make_result(std::move(out), {probs}, [grad = std::move(grad)](ag::Node& self) {
    self.input_grad(0) += self.grad(0, 0) * grad;
  });
}

Var uncertainty_combine(const std::vector<Var>& losses, const Var& log_vars) {
  require(log_vars.rows() == 1 && log_vars.cols() == static_cast<Index>(losses.size()) && !losses.empty(),
          ErrorCode::kShapeMismatch, "uncertainty_combine: one log-variance per loss is required");
  Var total;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const Var s = ag::slice_cols(log_vars, static_cast<Index>(i), 1);
    const Var term = ag::add(ag::mul(ag::exp(ag::scale(s, -1.0)), losses[i]), s);
    total = total.defined() ? ag::add(total, term) : term;
  }
  return total;
}

DetHeadParams make_det_head(nn::ParamStore& store, Rng& rng, const std::string& prefix, Index bev_dim,
                            Index hidden, int k_thing, Index center_dim) {
  DetHeadParams p;
  p.shared = backbone::make_conv_block(store, rng, prefix + ".shared", 9, bev_dim, hidden);
  p.heatmap = nn::make_linear(store, rng, prefix + ".heatmap", hidden, k_thing);
  p.heatmap.bias.mutable_value().setConstant(kHeatmapPrior);
  p.reg = nn::make_linear(store, rng, prefix + ".reg", hidden, kRegChannels);
  p.refine = nn::make_linear(store, rng, prefix + ".refine", center_dim, kRegChannels);
  p.refine.weight.mutable_value().setZero();
  return p;
}

DetOutput detection_head(const backbone::BevMap& bev, const DetHeadParams& p) {
  const Var conv = sparse::rulebook_conv(bev.features, p.shared.weight, p.shared.bias,
                                         sparse::dense2d_rulebook(bev.w, bev.h, 1));
  const Var hidden = ag::relu(p.shared.norm(conv));
  return {p.heatmap(hidden), p.reg(hidden)};
}

Var refine_regression(const Var& reg, const Var& centers, std::span<const int> cells, const DetHeadParams& p) {
  require(centers.rows() == static_cast<Index>(cells.size()), ErrorCode::kShapeMismatch,
          "refine_regression: one cell per center query is required");
  if (cells.empty()) return reg;
  return ag::add(reg, ag::scatter_add_rows(p.refine(centers), cells, reg.rows()));
}

}  // namespace lmt::tasks
