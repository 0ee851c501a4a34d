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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lmt::kv {
class KeyValueFile;
}

namespace lmt::data {

// Semantic classes. Labels are 1-based; the first kNumStuff are background
// ("stuff") classes without boxes, the remaining are box-carrying "thing"
// classes.
inline constexpr int kNumClasses = 6;
inline constexpr int kNumStuff = 2;
inline constexpr int kNumThing = 4;

enum Label : std::int32_t {
  kGround = 1,
  kWall = 2,
  kVehicle = 3,
  kPedestrian = 4,
  kCyclist = 5,
  kBarrier = 6,
};

const char* class_name(int label);
// Box::class_id is a thing index in [1, kNumThing].
inline int label_of_thing(int thing_id) { return kNumStuff + thing_id; }
inline int thing_of_label(int label) { return label - kNumStuff; }

// Stored in single precision so file round-trips are exact.
struct Point {
  float x = 0, y = 0, z = 0;
  float intensity = 0;
  float timestamp = 0;  // seconds relative to the current frame, <= 0

  bool operator==(const Point&) const = default;
};

struct Box {
  std::array<float, 3> center{};
  std::array<float, 3> size{};  // length (along yaw), width, height
  float yaw = 0;                // [-pi, pi)
  std::int32_t class_id = 1;    // thing index

  bool operator==(const Box&) const = default;
};

// p' = R p + t, with R row-major.
struct RigidTransform {
  std::array<float, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<float, 3> translation{};

  static RigidTransform translation_only(float x, float y, float z);
  static RigidTransform yaw_rotation(double yaw, float x, float y, float z);
  bool operator==(const RigidTransform&) const = default;
};

struct SceneSample {
  std::vector<Point> points;
  std::vector<std::int32_t> labels;
  std::vector<Box> boxes;
  std::int32_t frame_id = 0;
  // Earlier sweeps of the same scene, each in its own sensor frame;
  // history_poses[i] maps history[i] into this frame. history[i] is i+1
  // frames old.
  std::vector<SceneSample> history;
  std::vector<RigidTransform> history_poses;

  bool operator==(const SceneSample&) const = default;
};

// Returns true when p lies inside the closed oriented box.
bool point_in_box(double x, double y, double z, const Box& box);

struct SceneSpec {
  std::array<double, 3> extent_min{0.0, 0.0, 0.0};
  std::array<double, 3> extent_max{16.0, 16.0, 4.0};
  std::array<int, kNumThing> objects_per_class{1, 1, 1, 1};
  double ground_density = 4.0;    // points per square meter
  double surface_density = 14.0;  // object surface points per square meter
  double interior_fraction = 0.10;
  double ground_z = 0.25;
  double ground_noise = 0.02;
  int walls = 2;
  double wall_height = 2.5;
  double min_separation = 1.0;  // meters between object footprints
  int max_placement_retries = 2000;
  // Sweeps generated per sample (1 = current frame only).
  int frames = 1;
  double ego_step = 0.3;  // ego x-translation per frame, meters

  static SceneSpec from_file(const kv::KeyValueFile& f);
  void validate() const;
};

// Deterministic in (seed, spec). Throws Error(kPlacement) when boxes cannot
// be placed without overlap within spec.max_placement_retries attempts.
SceneSample generate_scene(std::uint64_t seed, const SceneSpec& spec);

// Merges history sweeps into the current frame. Output point count is the
// sum of inputs; history points are moved by their pose and their
// timestamps shifted by -(age * frame_interval). Labels follow points.
SceneSample concat_frames(const SceneSample& current, std::span<const SceneSample> history,
                          std::span<const RigidTransform> poses, double frame_interval);
// Convenience overload using the sample's own history.
SceneSample concat_frames(const SceneSample& sample, double frame_interval);

struct AugmentParams {
  bool flip_x = false;  // mirror across the x axis: y -> -y
  bool flip_y = false;  // mirror across the y axis: x -> -x
  double rotation = 0.0;
  double scale = 1.0;
  // Transforms act about this (x, y) pivot; z is scaled about 0.
  std::array<double, 2> pivot{0.0, 0.0};
};

// Applies flip_x, flip_y, rotation, scale in that order to points and boxes.
SceneSample augment(const SceneSample& sample, const AugmentParams& params);
SceneSample augment_inverse(const SceneSample& sample, const AugmentParams& params);
// Draws flips, yaw in [-pi/4, pi/4] and scale in [0.95, 1.05].
AugmentParams draw_augment_params(std::uint64_t seed, std::array<double, 2> pivot);

inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(std::span<const SceneSample> samples, const std::string& path);
std::vector<SceneSample> read_dataset(const std::string& path);
std::vector<std::uint8_t> encode_dataset(std::span<const SceneSample> samples);
std::vector<SceneSample> decode_dataset(const std::vector<std::uint8_t>& bytes);

}  // namespace lmt::data
