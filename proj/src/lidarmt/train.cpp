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

#include "lidarmt/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include "lidarmt/error.hpp"
#include "lidarmt/random.hpp"

namespace lmt::train {

double one_cycle_lr(const config::OptimConfig& o, long step, long total_steps) {
  const double initial = o.lr / o.div_factor;
  const double final_lr = o.lr / o.final_div;
  const double warm = o.warmup_fraction * static_cast<double>(total_steps);
  const double t = static_cast<double>(step);
  if (t < warm) return initial + (o.lr - initial) * t / warm;
  const double span = static_cast<double>(total_steps - 1) - warm;
  if (span <= 0) return o.lr;
  const double frac = std::min(1.0, (t - warm) / span);
  return final_lr + (o.lr - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

bool AdamW::decays(const std::string& name) {
  return !(name.ends_with(".bias") || name.ends_with(".gain") || name == "loss.log_vars");
}

void AdamW::step(nn::ParamStore& store, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(o_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(o_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : store.all()) {
    if (!p.has_grad()) continue;
    const ag::Mat& g = p.grad();
    auto [mit, mnew] = m_.try_emplace(name, ag::Mat::Zero(g.rows(), g.cols()));
    auto [vit, vnew] = v_.try_emplace(name, ag::Mat::Zero(g.rows(), g.cols()));
    ag::Mat& m = mit->second;
    ag::Mat& v = vit->second;
    m = o_.beta1 * m + (1.0 - o_.beta1) * g;
    v = o_.beta2 * v + (1.0 - o_.beta2) * g.cwiseProduct(g);
    ag::Mat& w = p.mutable_value();
    if (decays(name)) w *= 1.0 - lr * o_.weight_decay;
    w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + o_.eps);
  }
}

void AdamW::export_state(ckpt::Checkpoint& c) const {
  c.step = static_cast<std::uint64_t>(t_);
  c.adam_m = m_;
  c.adam_v = v_;
}

void AdamW::import_state(const ckpt::Checkpoint& c) {
  t_ = static_cast<long>(c.step);
  m_ = c.adam_m;
  v_ = c.adam_v;
}

std::vector<data::SceneSample> training_data(const config::Config& cfg) {
  if (!cfg.data.train.empty()) return data::read_dataset(cfg.resolve(cfg.data.train));
  std::vector<data::SceneSample> out;
  for (std::uint64_t s = cfg.data.seed_begin; s <= cfg.data.seed_end; ++s) {
    out.push_back(data::generate_scene(s, cfg.scene));
    out.back().frame_id = static_cast<std::int32_t>(s);
  }
  return out;
}

namespace {

void count_correct(const ag::Mat& logits, const std::vector<int>& targets, long& correct) {
  for (ag::Index r = 0; r < logits.rows(); ++r) {
    ag::Index best = 0;
    logits.row(r).maxCoeff(&best);
    correct += best == targets[static_cast<std::size_t>(r)];
  }
}

double clip_gradients(nn::ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : store.all())
    if (p.has_grad()) sq += p.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, p] : store.all())
      if (p.has_grad()) p.node()->grad *= s;
  }
  return norm;
}

void dump_state(const std::string& path, const model::Model& m, long step, int epoch, double lr,
                const data::SceneSample& sample, const model::LossBreakdown& b) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) return;
  out << "step = " << step << "\nepoch = " << epoch << "\nlr = " << lr
      << "\nframe_id = " << sample.frame_id << "\nloss.total = " << b.total << '\n';
  static const char* kTask[] = {"seg", "det_heatmap", "det_reg", "aux_seg"};
  for (int k = 0; k < tasks::kNumTasks; ++k)
    out << "loss." << kTask[k] << " = " << b.task[static_cast<std::size_t>(k)] << '\n';
  for (const auto& [name, p] : m.store.all()) {
    out << "param." << name << ".norm = " << p.value().norm() << '\n';
    out << "param." << name << ".finite = " << (p.value().allFinite() ? "true" : "false") << '\n';
  }
}

}  // namespace

TrainResult train(const config::Config& cfg, const std::vector<data::SceneSample>& samples,
                  const EpochCallback& on_epoch, const std::string& dump_path) {
  require(!samples.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  TrainResult result{model::build_model(cfg), {}, {}};
  model::Model& m = result.model;
  AdamW opt(cfg.optim);

  std::vector<std::optional<model::PreparedSample>> cache(samples.size());
  const SpatialShape full = cfg.grid.dims();
  const std::array<double, 2> pivot{
      cfg.grid.range_min[0] + 0.5 * full.w * cfg.grid.voxel_size[0],
      cfg.grid.range_min[1] + 0.5 * full.h * cfg.grid.voxel_size[1]};

  const long total = static_cast<long>(cfg.train.epochs) * static_cast<long>(samples.size());
  long step = 0;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    if (cfg.train.shuffle) {
      Rng rng(cfg.train.shuffle_seed + static_cast<std::uint64_t>(epoch));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    EpochLog log;
    log.epoch = epoch;
    long voxels = 0, correct = 0;
    for (std::size_t idx : order) {
      const double lr = one_cycle_lr(cfg.optim, step, total);
      model::PreparedSample fresh;
      const model::PreparedSample* prep = nullptr;
      if (cfg.train.augment) {
        const auto aug = data::draw_augment_params(
            cfg.train.augment_seed * 1000003ull + static_cast<std::uint64_t>(step), pivot);
        fresh = model::prepare(samples[idx], cfg, &aug);
        prep = &fresh;
      } else {
        if (!cache[idx]) cache[idx] = model::prepare(samples[idx], cfg);
        prep = &*cache[idx];
      }
      m.store.zero_grad();
      model::LossBreakdown b;
      auto diverged = [&](const std::string& what) {
        dump_state(dump_path, m, step, epoch, lr, samples[idx], b);
        fail(ErrorCode::kDiverged, what + " at step " + std::to_string(step) +
                                       (dump_path.empty() ? "" : ", state dumped to " + dump_path));
      };
      model::ForwardOutput out;
      ag::Var loss;
      try {
        out = model::forward(m, *prep);
        loss = model::compute_loss(m, *prep, out, &b);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDiverged) throw;
        b.total = std::numeric_limits<double>::quiet_NaN();
        diverged(e.what());
      }
      if (!std::isfinite(b.total)) diverged("non-finite loss");
      ag::backward(loss);
      clip_gradients(m.store, cfg.optim.grad_clip);
      opt.step(m.store, lr);
      ++step;

      log.loss += b.total;
      for (std::size_t k = 0; k < b.task.size(); ++k) log.task[k] += b.task[k];
      count_correct(out.seg_logits.value(), prep->voxel_targets, correct);
      voxels += static_cast<long>(prep->voxel_targets.size());
      log.lr = lr;
    }
    const double n = static_cast<double>(samples.size());
    log.loss /= n;
    for (double& t : log.task) t /= n;
    log.step = step;
    log.voxel_accuracy = voxels ? static_cast<double>(correct) / static_cast<double>(voxels) : 0.0;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  m.store.zero_grad();
  result.checkpoint = model::snapshot(m);
  opt.export_state(result.checkpoint);
  return result;
}

std::string format_epoch(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "epoch=%d step=%ld lr=%.6g loss=%.6f seg=%.6f det_hm=%.6f det_reg=%.6f aux=%.6f "
                "voxel_acc=%.4f",
                e.epoch, e.step, e.lr, e.loss, e.task[0], e.task[1], e.task[2], e.task[3],
                e.voxel_accuracy);
  return buf;
}

}  // namespace lmt::train
