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

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lidarmt/data.hpp"
#include "lidarmt/tasks.hpp"

namespace lmt::metrics {

// Rows are ground truth, columns prediction; class ids run 1..K.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void add(std::span<const std::int32_t> gt, std::span<const std::int32_t> pred);
  void merge(const ConfusionMatrix& other);

  int num_classes() const { return k_; }
  std::int64_t at(int gt, int pred) const;
  std::int64_t total() const;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

struct IouResult {
  std::vector<double> per_class;  // NaN when absent from gt and pred
  double mean = 0.0;
};

IouResult miou(const ConfusionMatrix& cm);

inline constexpr double kMinRecall = 0.1;
inline constexpr double kMinPrecision = 0.1;
inline const std::vector<double> kDistanceThresholds{0.5, 1.0, 2.0, 4.0};

// Area above the minimum precision of the 101-point max-precision envelope,
// over recall > kMinRecall, normalized to [0, 1].
double average_precision(std::span<const double> precision, std::span<const double> recall);

struct ApResult {
  std::vector<std::vector<double>> ap;  // [thing class][threshold], NaN without ground truth
  std::vector<double> class_mean;
  double map = 0.0;
};

ApResult center_distance_ap(const std::vector<std::vector<tasks::ScoredBox>>& preds,
                            const std::vector<std::vector<data::Box>>& gts, int k_thing,
                            std::span<const double> thresholds);

using Report = std::vector<std::pair<std::string, double>>;

Report make_report(const IouResult& iou, const ApResult& ap, std::span<const double> thresholds);
std::string format_text(const Report& r);
std::string format_kv(const Report& r);

}  // namespace lmt::metrics
