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

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "lidarmt/checkpoint.hpp"
#include "lidarmt/config.hpp"
#include "lidarmt/data.hpp"
#include "lidarmt/model.hpp"

namespace lmt::train {

// Linear warm-up from lr/div_factor to lr over warmup_fraction of the
// steps, then cosine decay to lr/final_div at the last step.
double one_cycle_lr(const config::OptimConfig& o, long step, long total_steps);

// Decoupled weight decay Adam. Biases, norm gains and the loss
// log-variances are not decayed.
class AdamW {
 public:
  explicit AdamW(const config::OptimConfig& o) : o_(o) {}

  // Applies one update to every parameter holding a gradient.
  void step(nn::ParamStore& store, double lr);
  long steps() const { return t_; }
  void export_state(ckpt::Checkpoint& c) const;
  void import_state(const ckpt::Checkpoint& c);

  static bool decays(const std::string& name);

 private:
  config::OptimConfig o_;
  long t_ = 0;
  ckpt::TensorMap m_, v_;
};

struct EpochLog {
  int epoch = 0;
  long step = 0;  // steps completed
  double lr = 0.0;
  double loss = 0.0;  // mean combined loss over the epoch
  std::array<double, tasks::kNumTasks> task{};
  double voxel_accuracy = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
  model::Model model;
  ckpt::Checkpoint checkpoint;  // parameters and optimizer state
  std::vector<EpochLog> log;
};

// Dataset named by cfg.data.train, or generated from cfg.scene over
// seeds [seed_begin, seed_end].
std::vector<data::SceneSample> training_data(const config::Config& cfg);

// One step per sample per epoch. A non-finite loss writes a diagnostic
// dump to dump_path (when non-empty) and throws Error(kDiverged).
TrainResult train(const config::Config& cfg, const std::vector<data::SceneSample>& samples,
                  const EpochCallback& on_epoch = {}, const std::string& dump_path = {});

std::string format_epoch(const EpochLog& e);

}  // namespace lmt::train
