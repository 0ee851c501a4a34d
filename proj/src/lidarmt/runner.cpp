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

#include "lidarmt/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lidarmt/error.hpp"

namespace lmt::run {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void emit_blocks(const char* module, const xsf::OffsetTrace& t, double quantile, OffsetDump& d) {
  for (std::size_t b = 0; b < t.blocks.size(); ++b) {
    const auto& blk = t.blocks[b];
    const ag::Mat& w = blk.weights;
    std::vector<double> all(w.data(), w.data() + w.size());
    double threshold = -1.0;
    if (quantile > 0 && !all.empty()) {
      const auto k = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(all.size() - 1)));
      std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
      threshold = all[k];
    }
    std::size_t rows = 0;
    std::ostringstream out;
    for (ag::Index q = 0; q < w.rows(); ++q)
      for (int head = 0; head < blk.n_head; ++head)
        for (int hgt = 0; hgt < blk.n_height; ++hgt)
          for (int pt = 0; pt < blk.n_point; ++pt) {
            const ag::Index s = (static_cast<ag::Index>(head) * blk.n_height + hgt) * blk.n_point + pt;
            const double wt = w(q, s);
            if (wt < threshold) continue;
            out << module << ',' << b << ',' << q << ',' << num(blk.refs(q, 0)) << ','
                << num(blk.refs(q, 1)) << ',' << blk.query_height[static_cast<std::size_t>(q)] << ','
                << head << ',' << hgt << ',' << pt << ',' << num(blk.offsets(q, 2 * s)) << ','
                << num(blk.offsets(q, 2 * s + 1)) << ',' << num(wt) << '\n';
            ++rows;
          }
    d.csv += out.str();
    d.rows += rows;
    d.rows_per_block.push_back(rows);
  }
}

}  // namespace

metrics::Report evaluate(const model::Model& m, const std::vector<data::SceneSample>& samples) {
  metrics::ConfusionMatrix cm(data::kNumClasses);
  std::vector<std::vector<tasks::ScoredBox>> preds;
  std::vector<std::vector<data::Box>> gts;
  long voxel_ok = 0, voxel_n = 0, point_ok = 0, point_n = 0, found = 0, objects = 0;
  const tasks::BevGrid grid = m.bev_grid();
  for (const auto& sample : samples) {
    const model::PreparedSample s = model::prepare(sample, m.cfg);
    const model::Prediction p = model::predict(m, s);
    cm.add(s.frame.voxel_labels, p.voxel_labels);
    for (std::size_t i = 0; i < p.voxel_labels.size(); ++i)
      voxel_ok += p.voxel_labels[i] == s.frame.voxel_labels[i];
    voxel_n += static_cast<long>(p.voxel_labels.size());
    for (std::size_t i = 0; i < p.point_labels.size(); ++i)
      point_ok += p.point_labels[i] == s.scene.labels[i];
    point_n += static_cast<long>(p.point_labels.size());
    for (const data::Box& g : s.scene.boxes) {
      ++objects;
      found += std::any_of(p.boxes.begin(), p.boxes.end(), [&](const tasks::ScoredBox& b) {
        return b.box.class_id == g.class_id &&
               std::abs(b.box.center[0] - g.center[0]) <= grid.cell_x &&
               std::abs(b.box.center[1] - g.center[1]) <= grid.cell_y;
      });
    }
    preds.push_back(p.boxes);
    gts.push_back(s.scene.boxes);
  }
  const auto iou = metrics::miou(cm);
  const auto ap = metrics::center_distance_ap(preds, gts, data::kNumThing, metrics::kDistanceThresholds);
  metrics::Report r = metrics::make_report(iou, ap, metrics::kDistanceThresholds);
  auto ratio = [](long a, long b) { return b ? static_cast<double>(a) / static_cast<double>(b) : std::nan(""); };
  r.emplace_back("seg.voxel_acc", ratio(voxel_ok, voxel_n));
  r.emplace_back("seg.point_acc", ratio(point_ok, point_n));
  r.emplace_back("det.center_recall", ratio(found, objects));
  r.emplace_back("samples", static_cast<double>(samples.size()));
  return r;
}

std::string infer(const model::Model& m, const std::vector<data::SceneSample>& samples) {
  std::ostringstream out;
  out << "samples = " << samples.size() << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const model::PreparedSample s = model::prepare(samples[i], m.cfg);
    const model::Prediction p = model::predict(m, s);
    const std::string pre = "sample." + std::to_string(i) + ".";
    out << pre << "frame_id = " << samples[i].frame_id << '\n';
    out << pre << "points = " << p.point_labels.size() << '\n';
    out << pre << "labels =";
    for (std::int32_t l : p.point_labels) out << ' ' << l;
    out << '\n' << pre << "boxes = " << p.boxes.size() << '\n';
    for (std::size_t j = 0; j < p.boxes.size(); ++j) {
      const auto& b = p.boxes[j];
      out << pre << "box." << j << " =";
      out << ' ' << b.box.class_id << ' ' << num(b.score);
      for (float v : b.box.center) out << ' ' << num(v);
      for (float v : b.box.size) out << ' ' << num(v);
      out << ' ' << num(b.box.yaw) << '\n';
    }
  }
  return out.str();
}

OffsetDump inspect_offsets(const model::Model& m, const data::SceneSample& sample, double quantile) {
  require(m.cfg.model.xsf, ErrorCode::kConfig, "model was built without the cross-space transformer");
  require(quantile >= 0 && quantile <= 1, ErrorCode::kInvalidArgument, "quantile must lie in [0, 1]");
  const model::PreparedSample s = model::prepare(sample, m.cfg);
  model::ForwardTrace trace;
  {
    ag::NoGradGuard guard;
    model::forward(m, s, &trace);
  }
  OffsetDump d;
  d.csv = "module,block,query,ref_u,ref_v,query_height,head,height,point,offset_u,offset_v,weight\n";
  emit_blocks("s2d", trace.s2d, quantile, d);
  emit_blocks("d2s", trace.d2s, quantile, d);
  return d;
}

}  // namespace lmt::run
