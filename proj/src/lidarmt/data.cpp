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

#include "lidarmt/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lidarmt/binio.hpp"
#include "lidarmt/error.hpp"
#include "lidarmt/kvfile.hpp"
#include "lidarmt/random.hpp"

namespace lmt::data {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSurfaceInset = 1e-3;
constexpr double kBoxLift = 0.1;
constexpr double kBorderMargin = 1.0;
constexpr double kWallInset = 0.5;

struct Template {
  std::array<double, 3> size;
  std::array<double, 3> jitter;
};

// Indexed by thing id - 1.
constexpr std::array<Template, kNumThing> kTemplates{{
    {{4.2, 1.8, 1.6}, {0.4, 0.1, 0.15}},
    {{0.7, 0.7, 1.75}, {0.1, 0.1, 0.1}},
    {{1.8, 0.7, 1.7}, {0.15, 0.1, 0.1}},
    {{2.0, 0.5, 1.0}, {0.3, 0.05, 0.1}},
}};

// Mean and spread of the return intensity, indexed by label - 1.
constexpr std::array<std::array<double, 2>, kNumClasses> kIntensity{{
    {0.10, 0.04}, {0.40, 0.05}, {0.75, 0.08}, {0.30, 0.06}, {0.55, 0.06}, {0.90, 0.04}}};

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  double r = a - kPi;
  if (r >= kPi) r -= 2.0 * kPi;
  return r;
}

float draw_intensity(Rng& rng, int label) {
  const auto& [mu, sd] = kIntensity[static_cast<std::size_t>(label - 1)];
  return static_cast<float>(std::clamp(rng.normal(mu, sd), 0.0, 1.0));
}

struct Wall {
  bool along_x;  // wall runs parallel to the x axis at fixed y
  double fixed;
  double from, to;
};

struct World {
  std::vector<Box> boxes;
  std::vector<Wall> walls;
};

World place_world(Rng& rng, const SceneSpec& spec) {
  World w;
  struct Disc {
    double x, y, r;
  };
  std::vector<Disc> discs;
  for (int t = 0; t < kNumThing; ++t) {
    for (int n = 0; n < spec.objects_per_class[static_cast<std::size_t>(t)]; ++n) {
      const auto& tpl = kTemplates[static_cast<std::size_t>(t)];
      Box b;
      b.class_id = t + 1;
      for (int a = 0; a < 3; ++a)
        b.size[static_cast<std::size_t>(a)] = static_cast<float>(
            tpl.size[static_cast<std::size_t>(a)] +
            rng.uniform(-1.0, 1.0) * tpl.jitter[static_cast<std::size_t>(a)]);
      b.yaw = static_cast<float>(wrap_angle(rng.uniform(-kPi, kPi)));
      const double r = 0.5 * std::hypot(b.size[0], b.size[1]);
      const double lo_x = spec.extent_min[0] + kBorderMargin + r;
      const double hi_x = spec.extent_max[0] - kBorderMargin - r;
      const double lo_y = spec.extent_min[1] + kBorderMargin + r;
      const double hi_y = spec.extent_max[1] - kBorderMargin - r;
      bool placed = false;
      for (int attempt = 0; attempt < spec.max_placement_retries && !placed; ++attempt) {
        if (hi_x <= lo_x || hi_y <= lo_y) break;
        const double x = rng.uniform(lo_x, hi_x);
        const double y = rng.uniform(lo_y, hi_y);
        placed = std::all_of(discs.begin(), discs.end(), [&](const Disc& d) {
          return std::hypot(d.x - x, d.y - y) >= d.r + r + spec.min_separation;
        });
        if (placed) {
          discs.push_back({x, y, r});
          b.center = {static_cast<float>(x), static_cast<float>(y),
                      static_cast<float>(spec.ground_z + kBoxLift + 0.5 * b.size[2])};
        }
      }
      require(placed, ErrorCode::kPlacement,
              std::string("could not place ") + class_name(label_of_thing(t + 1)) + " after " +
                  std::to_string(spec.max_placement_retries) + " attempts");
      w.boxes.push_back(b);
    }
  }
  // Border walls on distinct sides.
  std::array<int, 4> sides{0, 1, 2, 3};
  for (int i = 3; i > 0; --i)
    std::swap(sides[static_cast<std::size_t>(i)], sides[rng.below(static_cast<std::uint64_t>(i + 1))]);
  for (int i = 0; i < spec.walls; ++i) {
    const int side = sides[static_cast<std::size_t>(i)];
    Wall wall;
    wall.along_x = (side % 2 == 0);
    const int run_axis = wall.along_x ? 0 : 1;
    const int fixed_axis = wall.along_x ? 1 : 0;
    wall.fixed = side < 2 ? spec.extent_max[static_cast<std::size_t>(fixed_axis)] - kWallInset
                          : spec.extent_min[static_cast<std::size_t>(fixed_axis)] + kWallInset;
    const double lo = spec.extent_min[static_cast<std::size_t>(run_axis)] + kWallInset;
    const double hi = spec.extent_max[static_cast<std::size_t>(run_axis)] - kWallInset;
    const double len = (hi - lo) * rng.uniform(0.4, 1.0);
    wall.from = rng.uniform(lo, hi - len);
    wall.to = wall.from + len;
    w.walls.push_back(wall);
  }
  return w;
}

bool in_footprint(double x, double y, const Box& b) {
  const double c = std::cos(static_cast<double>(b.yaw));
  const double s = std::sin(static_cast<double>(b.yaw));
  const double dx = x - b.center[0];
  const double dy = y - b.center[1];
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= 0.5 * b.size[0] && std::abs(ly) <= 0.5 * b.size[1];
}

// Samples one sweep of the world, in world coordinates.
void sample_sweep(Rng& rng, const SceneSpec& spec, const World& world,
                  std::vector<Point>& points, std::vector<int>& source_label) {
  const double area = (spec.extent_max[0] - spec.extent_min[0]) *
                      (spec.extent_max[1] - spec.extent_min[1]);
  const auto n_ground = static_cast<std::size_t>(std::llround(area * spec.ground_density));
  for (std::size_t i = 0; i < n_ground; ++i) {
    const double x = rng.uniform(spec.extent_min[0], spec.extent_max[0]);
    const double y = rng.uniform(spec.extent_min[1], spec.extent_max[1]);
    const double z = spec.ground_z + rng.normal(0.0, spec.ground_noise);
    const float intensity = draw_intensity(rng, kGround);
    // The ground under an object is occluded.
    const bool hidden = std::any_of(world.boxes.begin(), world.boxes.end(),
                                    [&](const Box& b) { return in_footprint(x, y, b); });
    if (hidden) continue;
    points.push_back({static_cast<float>(x), static_cast<float>(y), static_cast<float>(z),
                      intensity, 0.0f});
    source_label.push_back(kGround);
  }

  for (const Wall& wall : world.walls) {
    const double wall_area = (wall.to - wall.from) * spec.wall_height;
    const auto n = static_cast<std::size_t>(std::llround(wall_area * spec.surface_density * 0.5));
    for (std::size_t i = 0; i < n; ++i) {
      const double run = rng.uniform(wall.from, wall.to);
      const double across = wall.fixed + rng.normal(0.0, spec.ground_noise);
      const double z = spec.ground_z + rng.uniform(0.0, spec.wall_height);
      const float intensity = draw_intensity(rng, kWall);
      const double x = wall.along_x ? run : across;
      const double y = wall.along_x ? across : run;
      points.push_back({static_cast<float>(x), static_cast<float>(y), static_cast<float>(z),
                        intensity, 0.0f});
      source_label.push_back(kWall);
    }
  }

  for (const Box& b : world.boxes) {
    const double l = b.size[0] - 2.0 * kSurfaceInset;
    const double w = b.size[1] - 2.0 * kSurfaceInset;
    const double h = b.size[2] - 2.0 * kSurfaceInset;
    const std::array<double, 6> face_area{w * h, w * h, l * h, l * h, l * w, l * w};
    double total = 0.0;
    for (double a : face_area) total += a;
    const auto n_surface = static_cast<std::size_t>(std::llround(total * spec.surface_density));
    const auto n_interior =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_surface) * spec.interior_fraction));
    const double c = std::cos(static_cast<double>(b.yaw));
    const double s = std::sin(static_cast<double>(b.yaw));
    const int label = label_of_thing(b.class_id);
    auto emit = [&](double lx, double ly, double lz) {
      const double x = b.center[0] + c * lx - s * ly;
      const double y = b.center[1] + s * lx + c * ly;
      const double z = b.center[2] + lz;
      points.push_back({static_cast<float>(x), static_cast<float>(y), static_cast<float>(z),
                        draw_intensity(rng, label), 0.0f});
      source_label.push_back(label);
    };
    for (std::size_t i = 0; i < n_surface; ++i) {
      double pick = rng.uniform(0.0, total);
      std::size_t face = 0;
      while (face + 1 < face_area.size() && pick >= face_area[face]) pick -= face_area[face++];
      double u = rng.uniform(-0.5, 0.5);
      double v = rng.uniform(-0.5, 0.5);
      const double sign = (face % 2 == 0) ? 0.5 : -0.5;
      if (face < 2) emit(sign * l, u * w, v * h);
      else if (face < 4) emit(u * l, sign * w, v * h);
      else emit(u * l, v * w, sign * h);
    }
    for (std::size_t i = 0; i < n_interior; ++i)
      emit(rng.uniform(-0.5, 0.5) * l, rng.uniform(-0.5, 0.5) * w, rng.uniform(-0.5, 0.5) * h);
  }
}

std::vector<std::int32_t> assign_labels(const std::vector<Point>& points,
                                        const std::vector<int>& source_label,
                                        const std::vector<Box>& boxes) {
  std::vector<std::int32_t> labels(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    std::int32_t label = source_label[i];
    for (const Box& b : boxes) {
      if (point_in_box(p.x, p.y, p.z, b)) {
        label = label_of_thing(b.class_id);
        break;
      }
    }
    labels[i] = label;
  }
  return labels;
}

struct Vec3 {
  double x, y, z;
};

Vec3 apply(const RigidTransform& t, double x, double y, double z) {
  const auto& r = t.rotation;
  return {r[0] * x + r[1] * y + r[2] * z + t.translation[0],
          r[3] * x + r[4] * y + r[5] * z + t.translation[1],
          r[6] * x + r[7] * y + r[8] * z + t.translation[2]};
}

}  // namespace

const char* class_name(int label) {
  switch (label) {
    case kGround: return "ground";
    case kWall: return "wall";
    case kVehicle: return "vehicle";
    case kPedestrian: return "pedestrian";
    case kCyclist: return "cyclist";
    case kBarrier: return "barrier";
    default: return "unknown";
  }
}

RigidTransform RigidTransform::translation_only(float x, float y, float z) {
  RigidTransform t;
  t.translation = {x, y, z};
  return t;
}

RigidTransform RigidTransform::yaw_rotation(double yaw, float x, float y, float z) {
  RigidTransform t;
  const auto c = static_cast<float>(std::cos(yaw));
  const auto s = static_cast<float>(std::sin(yaw));
  t.rotation = {c, -s, 0, s, c, 0, 0, 0, 1};
  t.translation = {x, y, z};
  return t;
}

bool point_in_box(double x, double y, double z, const Box& box) {
  return in_footprint(x, y, box) && std::abs(z - box.center[2]) <= 0.5 * box.size[2];
}

SceneSpec SceneSpec::from_file(const kv::KeyValueFile& f) {
  SceneSpec s;
  auto vec3 = [&](const std::string& key, std::array<double, 3> fallback) {
    auto v = f.get_doubles(key, {fallback.begin(), fallback.end()});
    require(v.size() == 3, ErrorCode::kConfig, key + ": expected 3 values");
    return std::array<double, 3>{v[0], v[1], v[2]};
  };
  s.extent_min = vec3("scene.extent_min", s.extent_min);
  s.extent_max = vec3("scene.extent_max", s.extent_max);
  s.objects_per_class[0] = static_cast<int>(f.get_int("scene.objects.vehicle", s.objects_per_class[0]));
  s.objects_per_class[1] = static_cast<int>(f.get_int("scene.objects.pedestrian", s.objects_per_class[1]));
  s.objects_per_class[2] = static_cast<int>(f.get_int("scene.objects.cyclist", s.objects_per_class[2]));
  s.objects_per_class[3] = static_cast<int>(f.get_int("scene.objects.barrier", s.objects_per_class[3]));
  s.ground_density = f.get_double("scene.ground_density", s.ground_density);
  s.surface_density = f.get_double("scene.surface_density", s.surface_density);
  s.interior_fraction = f.get_double("scene.interior_fraction", s.interior_fraction);
  s.ground_z = f.get_double("scene.ground_z", s.ground_z);
  s.ground_noise = f.get_double("scene.ground_noise", s.ground_noise);
  s.walls = static_cast<int>(f.get_int("scene.walls", s.walls));
  s.wall_height = f.get_double("scene.wall_height", s.wall_height);
  s.min_separation = f.get_double("scene.min_separation", s.min_separation);
  s.max_placement_retries = static_cast<int>(f.get_int("scene.max_placement_retries", s.max_placement_retries));
  s.frames = static_cast<int>(f.get_int("scene.frames", s.frames));
  s.ego_step = f.get_double("scene.ego_step", s.ego_step);
  s.validate();
  return s;
}

void SceneSpec::validate() const {
  for (int a = 0; a < 3; ++a)
    require(extent_max[static_cast<std::size_t>(a)] > extent_min[static_cast<std::size_t>(a)],
            ErrorCode::kInvalidArgument, "scene extent must be positive on every axis");
  for (int n : objects_per_class)
    require(n >= 0, ErrorCode::kInvalidArgument, "object counts must be non-negative");
  require(ground_density >= 0 && surface_density >= 0, ErrorCode::kInvalidArgument,
          "densities must be non-negative");
  require(walls >= 0 && walls <= 4, ErrorCode::kInvalidArgument, "walls must be in [0, 4]");
  require(frames >= 1, ErrorCode::kInvalidArgument, "frames must be >= 1");
  require(max_placement_retries >= 1, ErrorCode::kInvalidArgument, "retry cap must be >= 1");
}

SceneSample generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  Rng rng(seed);
  const World world = place_world(rng, spec);

  SceneSample sample;
  sample.frame_id = 0;
  sample.boxes = world.boxes;
  std::vector<int> source;
  sample_sweep(rng, spec, world, sample.points, source);
  sample.labels = assign_labels(sample.points, source, sample.boxes);

  for (int age = 1; age < spec.frames; ++age) {
    Rng sweep_rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(age)));
    std::vector<Point> pts;
    std::vector<int> src;
    sample_sweep(sweep_rng, spec, world, pts, src);
    // The sensor moved forward along x; the earlier sweep sits behind.
    const float shift = static_cast<float>(-age * spec.ego_step);
    SceneSample hist;
    hist.frame_id = -age;
    for (Box b : world.boxes) {
      b.center[0] -= shift;
      hist.boxes.push_back(b);
    }
    hist.labels = assign_labels(pts, src, world.boxes);
    for (Point& p : pts) p.x -= shift;
    hist.points = std::move(pts);
    sample.history.push_back(std::move(hist));
    sample.history_poses.push_back(RigidTransform::translation_only(shift, 0.0f, 0.0f));
  }
  return sample;
}

SceneSample concat_frames(const SceneSample& current, std::span<const SceneSample> history,
                          std::span<const RigidTransform> poses, double frame_interval) {
  require(history.size() == poses.size(), ErrorCode::kInvalidArgument,
          "concat_frames: " + std::to_string(history.size()) + " history frames but " +
              std::to_string(poses.size()) + " poses");
  SceneSample out;
  out.frame_id = current.frame_id;
  out.boxes = current.boxes;
  out.points = current.points;
  out.labels = current.labels;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const SceneSample& h = history[i];
    require(h.points.size() == h.labels.size(), ErrorCode::kInvalidArgument,
            "concat_frames: history labels do not match points");
    const double dt = static_cast<double>(i + 1) * frame_interval;
    for (std::size_t k = 0; k < h.points.size(); ++k) {
      const Point& p = h.points[k];
      const Vec3 q = apply(poses[i], p.x, p.y, p.z);
      out.points.push_back({static_cast<float>(q.x), static_cast<float>(q.y),
                            static_cast<float>(q.z), p.intensity,
                            static_cast<float>(p.timestamp - dt)});
      out.labels.push_back(h.labels[k]);
    }
  }
  return out;
}

SceneSample concat_frames(const SceneSample& sample, double frame_interval) {
  return concat_frames(sample, sample.history, sample.history_poses, frame_interval);
}

namespace {

struct PlanarMap {
  const AugmentParams& p;

  std::array<double, 3> forward(double x, double y, double z) const {
    x -= p.pivot[0];
    y -= p.pivot[1];
    if (p.flip_x) y = -y;
    if (p.flip_y) x = -x;
    const double c = std::cos(p.rotation), s = std::sin(p.rotation);
    const double rx = c * x - s * y, ry = s * x + c * y;
    return {rx * p.scale + p.pivot[0], ry * p.scale + p.pivot[1], z * p.scale};
  }
  std::array<double, 3> inverse(double x, double y, double z) const {
    x = (x - p.pivot[0]) / p.scale;
    y = (y - p.pivot[1]) / p.scale;
    z /= p.scale;
    const double c = std::cos(p.rotation), s = std::sin(p.rotation);
    double rx = c * x + s * y, ry = -s * x + c * y;
    if (p.flip_y) rx = -rx;
    if (p.flip_x) ry = -ry;
    return {rx + p.pivot[0], ry + p.pivot[1], z};
  }
  double forward_yaw(double yaw) const {
    if (p.flip_x) yaw = -yaw;
    if (p.flip_y) yaw = kPi - yaw;
    return wrap_angle(yaw + p.rotation);
  }
  double inverse_yaw(double yaw) const {
    yaw -= p.rotation;
    if (p.flip_y) yaw = kPi - yaw;
    if (p.flip_x) yaw = -yaw;
    return wrap_angle(yaw);
  }
};

template <typename PointFn, typename YawFn>
SceneSample transform_sample(const SceneSample& in, double size_factor, PointFn point_fn,
                             YawFn yaw_fn) {
  SceneSample out = in;
  for (Point& p : out.points) {
    const auto q = point_fn(p.x, p.y, p.z);
    p.x = static_cast<float>(q[0]);
    p.y = static_cast<float>(q[1]);
    p.z = static_cast<float>(q[2]);
  }
  for (Box& b : out.boxes) {
    const auto q = point_fn(b.center[0], b.center[1], b.center[2]);
    b.center = {static_cast<float>(q[0]), static_cast<float>(q[1]), static_cast<float>(q[2])};
    for (float& s : b.size) s = static_cast<float>(s * size_factor);
    b.yaw = static_cast<float>(yaw_fn(b.yaw));
  }
  return out;
}

}  // namespace

SceneSample augment(const SceneSample& sample, const AugmentParams& params) {
  require(params.scale >= 0.9 && params.scale <= 1.1, ErrorCode::kInvalidArgument,
          "augment: scale must lie in [0.9, 1.1]");
  require(sample.history.empty(), ErrorCode::kInvalidArgument,
          "augment: merge history sweeps before augmenting");
  const PlanarMap m{params};
  return transform_sample(
      sample, params.scale, [&](double x, double y, double z) { return m.forward(x, y, z); },
      [&](double yaw) { return m.forward_yaw(yaw); });
}

SceneSample augment_inverse(const SceneSample& sample, const AugmentParams& params) {
  require(params.scale >= 0.9 && params.scale <= 1.1, ErrorCode::kInvalidArgument,
          "augment: scale must lie in [0.9, 1.1]");
  const PlanarMap m{params};
  return transform_sample(
      sample, 1.0 / params.scale, [&](double x, double y, double z) { return m.inverse(x, y, z); },
      [&](double yaw) { return m.inverse_yaw(yaw); });
}

AugmentParams draw_augment_params(std::uint64_t seed, std::array<double, 2> pivot) {
  Rng rng(seed);
  AugmentParams p;
  p.flip_x = rng.uniform() < 0.5;
  p.flip_y = rng.uniform() < 0.5;
  p.rotation = rng.uniform(-kPi / 4.0, kPi / 4.0);
  p.scale = rng.uniform(0.95, 1.05);
  p.pivot = pivot;
  return p;
}

namespace {

constexpr char kDatasetMagic[8] = {'L', 'M', 'T', 'D', 'S', 'E', 'T', '\0'};

void encode_pose(io::ByteWriter& w, const RigidTransform& t) {
  for (float v : t.rotation) w.f32(v);
  for (float v : t.translation) w.f32(v);
}

RigidTransform decode_pose(io::ByteReader& r) {
  RigidTransform t;
  for (float& v : t.rotation) v = r.f32();
  for (float& v : t.translation) v = r.f32();
  return t;
}

void encode_sample(io::ByteWriter& w, const SceneSample& s) {
  require(s.labels.size() == s.points.size(), ErrorCode::kInvalidArgument,
          "write_dataset: label count differs from point count");
  require(s.history.size() == s.history_poses.size(), ErrorCode::kInvalidArgument,
          "write_dataset: history frames and poses differ in count");
  w.i32(s.frame_id);
  w.u32(static_cast<std::uint32_t>(s.points.size()));
  for (const Point& p : s.points) {
    w.f32(p.x);
    w.f32(p.y);
    w.f32(p.z);
    w.f32(p.intensity);
    w.f32(p.timestamp);
  }
  for (std::int32_t l : s.labels) w.i32(l);
  w.u32(static_cast<std::uint32_t>(s.boxes.size()));
  for (const Box& b : s.boxes) {
    for (float v : b.center) w.f32(v);
    for (float v : b.size) w.f32(v);
    w.f32(b.yaw);
    w.i32(b.class_id);
  }
  w.u32(static_cast<std::uint32_t>(s.history.size()));
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    encode_pose(w, s.history_poses[i]);
    io::ByteWriter nested;
    encode_sample(nested, s.history[i]);
    w.u32(static_cast<std::uint32_t>(nested.size()));
    w.bytes(nested.data());
  }
}

SceneSample decode_sample(io::ByteReader& r) {
  SceneSample s;
  s.frame_id = r.i32();
  const std::uint32_t n = r.u32();
  require(r.remaining() / 24 >= n, ErrorCode::kFormat, "truncated record");
  s.points.resize(n);
  for (Point& p : s.points) {
    p.x = r.f32();
    p.y = r.f32();
    p.z = r.f32();
    p.intensity = r.f32();
    p.timestamp = r.f32();
  }
  s.labels.resize(n);
  for (std::int32_t& l : s.labels) l = r.i32();
  const std::uint32_t nb = r.u32();
  require(r.remaining() / 32 >= nb, ErrorCode::kFormat, "truncated record");
  s.boxes.resize(nb);
  for (Box& b : s.boxes) {
    for (float& v : b.center) v = r.f32();
    for (float& v : b.size) v = r.f32();
    b.yaw = r.f32();
    b.class_id = r.i32();
  }
  const std::uint32_t nh = r.u32();
  for (std::uint32_t i = 0; i < nh; ++i) {
    s.history_poses.push_back(decode_pose(r));
    const std::uint32_t len = r.u32();
    io::ByteReader nested = r.sub(len);
    s.history.push_back(decode_sample(nested));
    require(nested.remaining() == 0, ErrorCode::kFormat, "history record length mismatch");
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(std::span<const SceneSample> samples) {
  io::ByteWriter w;
  w.raw(std::string_view(kDatasetMagic, sizeof(kDatasetMagic)));
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(samples.size()));
  for (const SceneSample& s : samples) {
    io::ByteWriter rec;
    encode_sample(rec, s);
    w.u32(static_cast<std::uint32_t>(rec.size()));
    w.bytes(rec.data());
  }
  return w.data();
}

std::vector<SceneSample> decode_dataset(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader r(bytes.data(), bytes.size());
  require(bytes.size() >= sizeof(kDatasetMagic) &&
              r.raw(sizeof(kDatasetMagic)) == std::string(kDatasetMagic, sizeof(kDatasetMagic)),
          ErrorCode::kVersionMismatch, "not a dataset file (bad magic header)");
  const std::uint32_t version = r.u32();
  require(version == kDatasetVersion, ErrorCode::kVersionMismatch,
          "dataset version " + std::to_string(version) + " unsupported (expected " +
              std::to_string(kDatasetVersion) + ")");
  const std::uint32_t count = r.u32();
  std::vector<SceneSample> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    io::ByteReader rec = r.sub(len);
    out.push_back(decode_sample(rec));
    require(rec.remaining() == 0, ErrorCode::kFormat, "record length mismatch");
  }
  require(r.remaining() == 0, ErrorCode::kFormat, "trailing bytes after last record");
  return out;
}

void write_dataset(std::span<const SceneSample> samples, const std::string& path) {
  io::write_file(path, encode_dataset(samples));
}

std::vector<SceneSample> read_dataset(const std::string& path) {
  return decode_dataset(io::read_file(path));
}

}  // namespace lmt::data
