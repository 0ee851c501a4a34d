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

#include "lidarmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "lidarmt/error.hpp"

namespace lmt::metrics {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0) {
  require(num_classes > 0, ErrorCode::kInvalidArgument, "confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::span<const std::int32_t> gt, std::span<const std::int32_t> pred) {
  require(gt.size() == pred.size(), ErrorCode::kShapeMismatch, "confusion matrix: label counts differ");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    require(gt[i] >= 1 && gt[i] <= k_ && pred[i] >= 1 && pred[i] <= k_, ErrorCode::kOutOfRange,
            "confusion matrix: class id out of range");
    ++counts_[static_cast<std::size_t>((gt[i] - 1) * k_ + pred[i] - 1)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  require(other.k_ == k_, ErrorCode::kShapeMismatch, "confusion matrix: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::int64_t ConfusionMatrix::at(int gt, int pred) const {
  return counts_[static_cast<std::size_t>((gt - 1) * k_ + pred - 1)];
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

IouResult miou(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  IouResult r;
  double sum = 0;
  int valid = 0;
  for (int c = 1; c <= k; ++c) {
    std::int64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int o = 1; o <= k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::int64_t denom = tp + fp + fn;
    if (denom == 0) {
      r.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class.push_back(iou);
    sum += iou;
    ++valid;
  }
  r.mean = valid ? sum / valid : 0.0;
  return r;
}

double average_precision(std::span<const double> precision, std::span<const double> recall) {
  require(precision.size() == recall.size(), ErrorCode::kShapeMismatch, "average_precision: curve lengths differ");
  constexpr int kPoints = 101;
  const int first = static_cast<int>(std::lround(100 * kMinRecall)) + 1;
  double area = 0;
  for (int i = first; i < kPoints; ++i) {
    const double level = i / 100.0;
    double best = 0;
    for (std::size_t j = 0; j < recall.size(); ++j)
      if (recall[j] >= level - 1e-12) best = std::max(best, precision[j]);
    area += std::max(0.0, best - kMinPrecision);
  }
  return area / (kPoints - first) / (1.0 - kMinPrecision);
}

ApResult center_distance_ap(const std::vector<std::vector<tasks::ScoredBox>>& preds,
                            const std::vector<std::vector<data::Box>>& gts, int k_thing,
                            std::span<const double> thresholds) {
  require(preds.size() == gts.size(), ErrorCode::kShapeMismatch, "center_distance_ap: frame counts differ");
  ApResult r;
  double total = 0;
  int counted = 0;
  for (int cls = 1; cls <= k_thing; ++cls) {
    struct Det {
      double score;
      std::size_t frame;
      std::size_t index;
    };
    std::vector<Det> dets;
    std::size_t npos = 0;
    for (std::size_t f = 0; f < preds.size(); ++f) {
      for (std::size_t i = 0; i < preds[f].size(); ++i)
        if (preds[f][i].box.class_id == cls) dets.push_back({preds[f][i].score, f, i});
      for (const auto& g : gts[f]) npos += g.class_id == cls;
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.score > b.score; });
    std::vector<double> row;
    double class_sum = 0;
    for (double thr : thresholds) {
      if (npos == 0) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      std::vector<std::vector<bool>> taken(gts.size());
      for (std::size_t f = 0; f < gts.size(); ++f) taken[f].assign(gts[f].size(), false);
      std::vector<double> prec, rec;
      double tp = 0, fp = 0;
      for (const Det& d : dets) {
        const data::Box& p = preds[d.frame][d.index].box;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < gts[d.frame].size(); ++j) {
          const data::Box& g = gts[d.frame][j];
          if (g.class_id != cls || taken[d.frame][j]) continue;
          const double dist = std::hypot(static_cast<double>(p.center[0]) - g.center[0],
                                         static_cast<double>(p.center[1]) - g.center[1]);
          if (dist < best) {
            best = dist;
            best_j = j;
          }
        }
        if (best <= thr) {
          taken[d.frame][best_j] = true;
          tp += 1;
        } else {
          fp += 1;
        }
        prec.push_back(tp / (tp + fp));
        rec.push_back(tp / static_cast<double>(npos));
      }
      const double ap = average_precision(prec, rec);
      row.push_back(ap);
      class_sum += ap;
    }
    r.ap.push_back(row);
    if (npos == 0) {
      r.class_mean.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      r.class_mean.push_back(class_sum / static_cast<double>(thresholds.size()));
      total += class_sum;
      counted += static_cast<int>(thresholds.size());
    }
  }
  r.map = counted ? total / counted : 0.0;
  return r;
}

Report make_report(const IouResult& iou, const ApResult& ap, std::span<const double> thresholds) {
  Report r;
  r.emplace_back("seg.miou", iou.mean);
  for (std::size_t k = 0; k < iou.per_class.size(); ++k)
    r.emplace_back(std::string("seg.iou.") + data::class_name(static_cast<int>(k) + 1), iou.per_class[k]);
  r.emplace_back("det.map", ap.map);
  for (std::size_t c = 0; c < ap.ap.size(); ++c) {
    const std::string name = data::class_name(data::label_of_thing(static_cast<int>(c) + 1));
    r.emplace_back("det.ap." + name, ap.class_mean[c]);
    for (std::size_t t = 0; t < thresholds.size() && t < ap.ap[c].size(); ++t) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", thresholds[t]);
      r.emplace_back("det.ap." + name + "@" + buf, ap.ap[c][t]);
    }
  }
  return r;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string format_text(const Report& r) {
  std::string out;
  for (const auto& [k, v] : r) out += k + ": " + num(v) + "\n";
  return out;
}

std::string format_kv(const Report& r) {
  std::string out;
  for (const auto& [k, v] : r) out += k + " = " + num(v) + "\n";
  return out;
}

}  // namespace lmt::metrics
