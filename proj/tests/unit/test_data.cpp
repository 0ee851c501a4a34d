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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "lidarmt/binio.hpp"
#include "lidarmt/data.hpp"
#include "lidarmt/error.hpp"
#include "lidarmt/kvfile.hpp"
#include "support/oracles.hpp"

namespace lmt::data {
namespace {

using testing::oracle_point_in_box;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("lmt_test_" + name)).string();
}

void expect_labels_match_oracle(const SceneSample& s) {
  ASSERT_EQ(s.points.size(), s.labels.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const Point& p = s.points[i];
    int expected = -1;
    for (const Box& b : s.boxes)
      if (oracle_point_in_box(p.x, p.y, p.z, b)) expected = label_of_thing(b.class_id);
    if (expected < 0) {
      EXPECT_LE(s.labels[i], kNumStuff) << "point " << i << " outside all boxes";
    } else {
      EXPECT_EQ(s.labels[i], expected) << "point " << i;
    }
  }
}

TEST(GenerateScene, NoObjectsGivesOnlyBackground) {
  SceneSpec spec;
  spec.objects_per_class = {0, 0, 0, 0};
  spec.walls = 0;
  const SceneSample s = generate_scene(1, spec);
  EXPECT_TRUE(s.boxes.empty());
  ASSERT_FALSE(s.points.empty());
  for (auto l : s.labels) EXPECT_EQ(l, kGround);
}

TEST(GenerateScene, LabelsAgreeWithIndependentBoxOracle) {
  SceneSpec spec;
  spec.objects_per_class = {1, 1, 1, 0};
  const SceneSample s = generate_scene(7, spec);
  ASSERT_EQ(s.boxes.size(), 3u);
  expect_labels_match_oracle(s);
  std::size_t in_boxes = 0;
  for (auto l : s.labels) in_boxes += l > kNumStuff;
  EXPECT_GT(in_boxes, 100u);
}

TEST(GenerateScene, OracleAgreementAcrossSeeds) {
  SceneSpec spec;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const SceneSample s = generate_scene(seed, spec);
    expect_labels_match_oracle(s);
    for (const Box& b : s.boxes) {
      EXPECT_GT(b.size[0], 0);
      EXPECT_GE(b.yaw, -std::numbers::pi_v<float>);
      EXPECT_LT(b.yaw, std::numbers::pi_v<float>);
    }
    for (const Point& p : s.points) {
      EXPECT_TRUE(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z));
      EXPECT_LE(p.timestamp, 0.0f);
    }
  }
}

TEST(GenerateScene, DeterministicGivenSeed) {
  SceneSpec spec;
  spec.frames = 2;
  EXPECT_EQ(generate_scene(42, spec), generate_scene(42, spec));
  EXPECT_NE(generate_scene(42, spec).points, generate_scene(43, spec).points);
}

TEST(GenerateScene, PlacementFailureIsReported) {
  SceneSpec spec;
  spec.objects_per_class = {30, 0, 0, 0};
  spec.max_placement_retries = 20;
  try {
    generate_scene(3, spec);
    FAIL() << "expected a placement error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPlacement);
  }
}

TEST(GenerateScene, SpecFromKeyValueFile) {
  auto f = kv::KeyValueFile::parse(
      "scene.objects.vehicle = 2\nscene.walls = 1\nscene.extent_max = 20 20 4\n");
  const SceneSpec spec = SceneSpec::from_file(f);
  EXPECT_EQ(spec.objects_per_class[0], 2);
  EXPECT_EQ(spec.walls, 1);
  EXPECT_DOUBLE_EQ(spec.extent_max[0], 20.0);
  EXPECT_THROW(SceneSpec::from_file(kv::KeyValueFile::parse("scene.walls = 9\n")), Error);
}

TEST(ConcatFrames, EmptyHistoryIsIdentity) {
  const SceneSample s = generate_scene(5, SceneSpec{});
  const SceneSample out = concat_frames(s, {}, {}, 0.1);
  EXPECT_EQ(out.points, s.points);
  EXPECT_EQ(out.labels, s.labels);
  for (const Point& p : out.points) EXPECT_EQ(p.timestamp, 0.0f);
}

TEST(ConcatFrames, IdentityPoseAppendsWithNegativeTimestamp) {
  const SceneSample cur = generate_scene(5, SceneSpec{});
  const SceneSample hist = generate_scene(6, SceneSpec{});
  const std::vector<SceneSample> h{hist};
  const std::vector<RigidTransform> poses{RigidTransform{}};
  const SceneSample out = concat_frames(cur, h, poses, 0.1);
  ASSERT_EQ(out.points.size(), cur.points.size() + hist.points.size());
  for (std::size_t i = 0; i < hist.points.size(); ++i) {
    const Point& p = out.points[cur.points.size() + i];
    EXPECT_EQ(p.x, hist.points[i].x);
    EXPECT_FLOAT_EQ(p.timestamp, -0.1f);
    EXPECT_EQ(out.labels[cur.points.size() + i], hist.labels[i]);
  }
}

TEST(ConcatFrames, TranslationIsAppliedPointwise) {
  const SceneSample cur = generate_scene(8, SceneSpec{});
  const SceneSample hist = generate_scene(9, SceneSpec{});
  const std::vector<SceneSample> h{hist};
  const std::vector<RigidTransform> poses{RigidTransform::translation_only(1, 0, 0)};
  const SceneSample out = concat_frames(cur, h, poses, 0.1);
  for (std::size_t i = 0; i < hist.points.size(); ++i) {
    const Point& p = out.points[cur.points.size() + i];
    EXPECT_FLOAT_EQ(p.x, static_cast<float>(static_cast<double>(hist.points[i].x) + 1.0));
    EXPECT_EQ(p.y, hist.points[i].y);
    EXPECT_EQ(p.z, hist.points[i].z);
    EXPECT_EQ(p.intensity, hist.points[i].intensity);
  }
}

TEST(ConcatFrames, MissingPoseIsAnError) {
  const SceneSample cur = generate_scene(8, SceneSpec{});
  const std::vector<SceneSample> h{cur, cur};
  const std::vector<RigidTransform> poses{RigidTransform{}};
  EXPECT_THROW(concat_frames(cur, h, poses, 0.1), Error);
}

TEST(ConcatFrames, AssociativeInPointContent) {
  const SceneSample a = generate_scene(1, SceneSpec{});
  const SceneSample b = generate_scene(2, SceneSpec{});
  const SceneSample c = generate_scene(3, SceneSpec{});
  const std::vector<RigidTransform> id2{RigidTransform{}, RigidTransform{}};
  const std::vector<SceneSample> bc{b, c};
  const SceneSample all = concat_frames(a, bc, id2, 0.0);
  const std::vector<SceneSample> only_b{b}, only_c{c};
  const std::vector<RigidTransform> id1{RigidTransform{}};
  const SceneSample stepwise = concat_frames(concat_frames(a, only_b, id1, 0.0), only_c, id1, 0.0);
  EXPECT_EQ(all.points, stepwise.points);
  EXPECT_EQ(all.labels, stepwise.labels);
}

TEST(ConcatFrames, GeneratedHistoryStaysConsistentAfterMerge) {
  SceneSpec spec;
  spec.frames = 2;
  const SceneSample s = generate_scene(11, spec);
  ASSERT_EQ(s.history.size(), 1u);
  const SceneSample merged = concat_frames(s, 0.1);
  EXPECT_EQ(merged.points.size(), s.points.size() + s.history[0].points.size());
  EXPECT_EQ(merged.boxes, s.boxes);
  expect_labels_match_oracle(merged);
}

TEST(Augment, IdentityLeavesSampleUnchanged) {
  const SceneSample s = generate_scene(4, SceneSpec{});
  EXPECT_EQ(augment(s, AugmentParams{}), s);
}

TEST(Augment, FlipXNegatesYAndYaw) {
  const SceneSample s = generate_scene(4, SceneSpec{});
  AugmentParams p;
  p.flip_x = true;
  const SceneSample a = augment(s, p);
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    EXPECT_EQ(a.points[i].y, -s.points[i].y);
    EXPECT_EQ(a.points[i].x, s.points[i].x);
  }
  for (std::size_t i = 0; i < s.boxes.size(); ++i)
    EXPECT_NEAR(std::remainder(a.boxes[i].yaw + s.boxes[i].yaw, 2 * std::numbers::pi), 0.0, 1e-6);
  EXPECT_EQ(a.labels, s.labels);
  expect_labels_match_oracle(a);
}

TEST(Augment, QuarterTurnRotation) {
  SceneSample s;
  s.points.push_back({1.0f, 0.0f, 2.5f, 0.5f, 0.0f});
  s.labels.push_back(kGround);
  AugmentParams p;
  p.rotation = std::numbers::pi / 2;
  const SceneSample a = augment(s, p);
  EXPECT_NEAR(a.points[0].x, 0.0, 1e-6);
  EXPECT_NEAR(a.points[0].y, 1.0, 1e-6);
  EXPECT_NEAR(a.points[0].z, 2.5, 1e-6);
}

TEST(Augment, InverseRestoresCoordinatesAndOracleHolds) {
  const SceneSample s = generate_scene(10, SceneSpec{});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AugmentParams p = draw_augment_params(seed, {8.0, 8.0});
    EXPECT_GE(p.scale, 0.95);
    EXPECT_LE(p.scale, 1.05);
    const SceneSample a = augment(s, p);
    expect_labels_match_oracle(a);
    const SceneSample back = augment_inverse(a, p);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      EXPECT_NEAR(back.points[i].x, s.points[i].x, 1e-5);
      EXPECT_NEAR(back.points[i].y, s.points[i].y, 1e-5);
      EXPECT_NEAR(back.points[i].z, s.points[i].z, 1e-5);
    }
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
      EXPECT_NEAR(back.boxes[i].center[0], s.boxes[i].center[0], 1e-5);
      EXPECT_NEAR(std::remainder(back.boxes[i].yaw - s.boxes[i].yaw, 2 * std::numbers::pi), 0.0, 1e-5);
    }
  }
}

TEST(Augment, ScaleOutsideRangeIsRejected) {
  AugmentParams p;
  p.scale = 1.5;
  EXPECT_THROW(augment(SceneSample{}, p), Error);
}

TEST(Dataset, RoundTripIsExact) {
  SceneSpec spec;
  spec.frames = 2;
  std::vector<SceneSample> samples{generate_scene(1, spec), generate_scene(2, spec)};
  const std::string path = temp_path("roundtrip.lmtd");
  write_dataset(samples, path);
  EXPECT_EQ(read_dataset(path), samples);
  std::filesystem::remove(path);
}

TEST(Dataset, EmptyListRoundTrips) {
  const std::string path = temp_path("empty.lmtd");
  write_dataset({}, path);
  EXPECT_TRUE(read_dataset(path).empty());
  std::filesystem::remove(path);
}

TEST(Dataset, CorruptedMagicIsVersionMismatch) {
  auto bytes = encode_dataset(std::vector<SceneSample>{generate_scene(1, SceneSpec{})});
  bytes[0] = 'X';
  try {
    decode_dataset(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
  }
}

TEST(Dataset, WrongVersionAndTruncationAreStructuredErrors) {
  auto bytes = encode_dataset(std::vector<SceneSample>{generate_scene(1, SceneSpec{})});
  auto bumped = bytes;
  bumped[8] = 99;
  try {
    decode_dataset(bumped);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
  }
  bytes.resize(bytes.size() / 2);
  try {
    decode_dataset(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
}

TEST(Dataset, MissingFileIsIoError) {
  try {
    read_dataset("/nonexistent/dir/file.lmtd");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

}  // namespace
}  // namespace lmt::data
