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

#include "lidarmt/config.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <sstream>

#include "lidarmt/binio.hpp"
#include "lidarmt/error.hpp"
#include "lidarmt/kvfile.hpp"

namespace lmt::config {
namespace {

template <typename F>
void visit(Config& c, F&& f) {
  f("grid.voxel_size", c.grid.voxel_size);
  f("grid.range_min", c.grid.range_min);
  f("grid.range_max", c.grid.range_max);

  ModelConfig& m = c.model;
  f("model.vfe_widths", m.vfe_widths);
  f("model.base_channels", m.backbone.base_channels);
  f("model.multipliers", m.backbone.multipliers);
  f("model.bev_levels", m.backbone.bev_levels);
  f("model.xsf", m.xsf);
  f("model.xsf.blocks", m.xsf_cfg.blocks);
  f("model.xsf.heads", m.xsf_cfg.n_head);
  f("model.xsf.points", m.xsf_cfg.n_point);
  f("model.xsf.head_dim", m.xsf_cfg.head_dim);
  f("model.xsf.ffn_dim", m.xsf_cfg.ffn_dim);
  f("model.xtf", m.xtf);
  f("model.xtf.layers", m.xtf_cfg.layers);
  f("model.xtf.heads", m.xtf_cfg.n_head);
  f("model.xtf.head_dim", m.xtf_cfg.head_dim);
  f("model.xtf.ffn_dim", m.xtf_cfg.ffn_dim);
  f("model.xtf.window", m.xtf_cfg.window);
  f("model.xtf.centers", m.xtf_cfg.n_ctr);
  f("model.xtf.mask_cross_task", m.xtf_cfg.mask_cross_task);
  f("model.det_hidden", m.det_hidden);

  f("loss.seg", c.loss.seg);
  f("loss.lovasz", c.loss.lovasz);
  f("loss.det", c.loss.det);
  f("loss.aux", c.loss.aux);
  f("loss.uncertainty", c.loss.uncertainty);

  f("optim.lr", c.optim.lr);
  f("optim.weight_decay", c.optim.weight_decay);
  f("optim.beta1", c.optim.beta1);
  f("optim.beta2", c.optim.beta2);
  f("optim.eps", c.optim.eps);
  f("optim.div_factor", c.optim.div_factor);
  f("optim.final_div", c.optim.final_div);
  f("optim.warmup_fraction", c.optim.warmup_fraction);
  f("optim.grad_clip", c.optim.grad_clip);

  f("train.epochs", c.train.epochs);
  f("train.init_seed", c.train.init_seed);
  f("train.shuffle", c.train.shuffle);
  f("train.shuffle_seed", c.train.shuffle_seed);
  f("train.augment", c.train.augment);
  f("train.augment_seed", c.train.augment_seed);

  f("data.train", c.data.train);
  f("data.seed_begin", c.data.seed_begin);
  f("data.seed_end", c.data.seed_end);
  f("data.frames", c.data.frames);
  f("data.frame_interval", c.data.frame_interval);
  f("data.score_threshold", c.data.score_threshold);
  f("data.max_boxes", c.data.max_boxes);

  data::SceneSpec& s = c.scene;
  f("scene.extent_min", s.extent_min);
  f("scene.extent_max", s.extent_max);
  f("scene.objects.vehicle", s.objects_per_class[0]);
  f("scene.objects.pedestrian", s.objects_per_class[1]);
  f("scene.objects.cyclist", s.objects_per_class[2]);
  f("scene.objects.barrier", s.objects_per_class[3]);
  f("scene.ground_density", s.ground_density);
  f("scene.surface_density", s.surface_density);
  f("scene.interior_fraction", s.interior_fraction);
  f("scene.ground_z", s.ground_z);
  f("scene.ground_noise", s.ground_noise);
  f("scene.walls", s.walls);
  f("scene.wall_height", s.wall_height);
  f("scene.min_separation", s.min_separation);
  f("scene.max_placement_retries", s.max_placement_retries);
  f("scene.frames", s.frames);
  f("scene.ego_step", s.ego_step);
}

std::string fmt(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Reader {
  const kv::KeyValueFile& f;

  void operator()(const std::string& k, double& v) const { v = f.get_double(k, v); }
  void operator()(const std::string& k, int& v) const {
    const long long x = f.get_int(k, v);
    require(x >= INT32_MIN && x <= INT32_MAX, ErrorCode::kConfig, "key '" + k + "': out of range");
    v = static_cast<int>(x);
  }
  void operator()(const std::string& k, long& v) const { v = static_cast<long>(f.get_int(k, v)); }
  void operator()(const std::string& k, std::uint64_t& v) const {
    const long long x = f.get_int(k, static_cast<long long>(v));
    require(x >= 0, ErrorCode::kConfig, "key '" + k + "': must be non-negative");
    v = static_cast<std::uint64_t>(x);
  }
  void operator()(const std::string& k, bool& v) const { v = f.get_bool(k, v); }
  void operator()(const std::string& k, std::string& v) const { v = f.get_string(k, v); }
  void operator()(const std::string& k, std::array<double, 3>& v) const {
    const auto x = f.get_doubles(k, {v.begin(), v.end()});
    require(x.size() == 3, ErrorCode::kConfig, "key '" + k + "': expected 3 values");
    for (std::size_t i = 0; i < 3; ++i) v[i] = x[i];
  }
  template <std::size_t N>
  void operator()(const std::string& k, std::array<int, N>& v) const {
    const auto x = f.get_ints(k, {v.begin(), v.end()});
    require(x.size() == N, ErrorCode::kConfig,
            "key '" + k + "': expected " + std::to_string(N) + " values");
    for (std::size_t i = 0; i < N; ++i) v[i] = static_cast<int>(x[i]);
  }
  void operator()(const std::string& k, std::vector<int>& v) const {
    const auto x = f.get_ints(k, {v.begin(), v.end()});
    v.assign(x.begin(), x.end());
  }
};

struct Writer {
  std::ostringstream& out;
  bool (*keep)(const std::string&);

  void line(const std::string& k, const std::string& v) const {
    if (keep(k)) out << k << " = " << v << '\n';
  }
  void operator()(const std::string& k, double v) const { line(k, fmt(v)); }
  void operator()(const std::string& k, int v) const { line(k, std::to_string(v)); }
  void operator()(const std::string& k, long v) const { line(k, std::to_string(v)); }
  void operator()(const std::string& k, std::uint64_t v) const { line(k, std::to_string(v)); }
  void operator()(const std::string& k, bool v) const { line(k, v ? "true" : "false"); }
  void operator()(const std::string& k, const std::string& v) const { line(k, v); }
  void operator()(const std::string& k, const std::array<double, 3>& v) const {
    line(k, fmt(v[0]) + " " + fmt(v[1]) + " " + fmt(v[2]));
  }
  template <std::size_t N>
  void operator()(const std::string& k, const std::array<int, N>& v) const {
    std::string s;
    for (int x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
    line(k, s);
  }
  void operator()(const std::string& k, const std::vector<int>& v) const {
    std::string s;
    for (int x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
    line(k, s);
  }
};

bool keep_all(const std::string&) { return true; }
bool keep_model(const std::string& k) { return k.starts_with("grid.") || k.starts_with("model."); }

std::string emit(const Config& c, bool (*keep)(const std::string&)) {
  std::ostringstream out;
  visit(const_cast<Config&>(c), Writer{out, keep});
  return out.str();
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  const auto f = kv::KeyValueFile::parse(text, origin);
  Config c;
  visit(c, Reader{f});
  const auto unused = f.unused_keys();
  require(unused.empty(), ErrorCode::kConfig,
          origin + ": unknown key '" + (unused.empty() ? "" : unused.front()) + "'");
  c.model.backbone.in_channels = c.model.vfe_widths.empty() ? 0 : c.model.vfe_widths.back();
  c.validate();
  return c;
}

Config Config::load(const std::string& path) {
  const auto bytes = io::read_file(path);
  Config c = parse(std::string(bytes.begin(), bytes.end()), path);
  c.base_dir = std::filesystem::path(path).parent_path().string();
  return c;
}

void Config::validate() const {
  grid.validate();
  require(!model.vfe_widths.empty(), ErrorCode::kConfig, "model.vfe_widths must not be empty");
  for (int w : model.vfe_widths) require(w > 0, ErrorCode::kConfig, "model.vfe_widths must be positive");
  model.backbone.validate();
  const SpatialShape s = grid.dims();
  require(s.w % 8 == 0 && s.h % 8 == 0 && s.d % 8 == 0, ErrorCode::kConfig,
          "grid dims must be multiples of 8 for three stride-2 stages");
  auto positive = [](int v, const char* key) {
    require(v > 0, ErrorCode::kConfig, std::string(key) + " must be positive");
  };
  positive(model.xsf_cfg.blocks, "model.xsf.blocks");
  positive(model.xsf_cfg.n_head, "model.xsf.heads");
  positive(model.xsf_cfg.n_point, "model.xsf.points");
  positive(static_cast<int>(model.xsf_cfg.head_dim), "model.xsf.head_dim");
  positive(static_cast<int>(model.xsf_cfg.ffn_dim), "model.xsf.ffn_dim");
  positive(model.xtf_cfg.layers, "model.xtf.layers");
  positive(model.xtf_cfg.n_head, "model.xtf.heads");
  positive(static_cast<int>(model.xtf_cfg.head_dim), "model.xtf.head_dim");
  positive(static_cast<int>(model.xtf_cfg.ffn_dim), "model.xtf.ffn_dim");
  positive(model.xtf_cfg.n_ctr, "model.xtf.centers");
  positive(model.det_hidden, "model.det_hidden");
  require(model.xtf_cfg.window >= 1 && model.xtf_cfg.window % 2 == 1, ErrorCode::kConfig,
          "model.xtf.window must be odd and positive");
  require(loss.seg || loss.det || loss.aux, ErrorCode::kConfig, "at least one loss must be enabled");
  require(optim.lr >= 0 && optim.weight_decay >= 0, ErrorCode::kConfig,
          "optim.lr and optim.weight_decay must be non-negative");
  require(optim.beta1 >= 0 && optim.beta1 < 1 && optim.beta2 >= 0 && optim.beta2 < 1,
          ErrorCode::kConfig, "optim betas must lie in [0, 1)");
  require(optim.eps > 0 && optim.div_factor >= 1 && optim.final_div >= 1, ErrorCode::kConfig,
          "optim.eps must be positive, div factors at least 1");
  require(optim.warmup_fraction >= 0 && optim.warmup_fraction < 1, ErrorCode::kConfig,
          "optim.warmup_fraction must lie in [0, 1)");
  require(optim.grad_clip >= 0, ErrorCode::kConfig, "optim.grad_clip must be non-negative");
  require(train.epochs >= 1, ErrorCode::kConfig, "train.epochs must be >= 1");
  require(data.seed_end >= data.seed_begin, ErrorCode::kConfig, "data.seed_end < data.seed_begin");
  require(data.frames >= 1, ErrorCode::kConfig, "data.frames must be >= 1");
  require(data.frame_interval > 0, ErrorCode::kConfig, "data.frame_interval must be positive");
  require(data.max_boxes >= 1, ErrorCode::kConfig, "data.max_boxes must be >= 1");
  scene.validate();
}

std::string Config::model_signature() const { return emit(*this, keep_model); }

std::uint64_t Config::hash() const { return fnv1a64(model_signature()); }

std::string Config::to_text() const { return emit(*this, keep_all); }

std::string Config::resolve(const std::string& path) const {
  if (path.empty() || base_dir.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).string();
}

}  // namespace lmt::config
