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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lidarmt/lidarmt.h"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;

namespace {

class CApi : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "lmt_capi_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("scene.cfg", "scene.frames = 2\nscene.ground_density = 1\nscene.surface_density = 4\n");
    ASSERT_EQ(lmt_generate_dataset(path("scene.cfg").c_str(), 3, 4, path("data.bin").c_str()), LMT_OK)
        << lmt_last_error();
    write("train.cfg", testing_fixtures::micro_config_with(
                           "train.epochs = 2\ndata.frames = 2\ndata.train = data.bin\n"));
    int lines = 0;
    auto log = [](const char* line, void* user) {
      EXPECT_EQ(std::string(line).rfind("epoch=", 0), 0u);
      ++*static_cast<int*>(user);
    };
    ASSERT_EQ(lmt_train(path("train.cfg").c_str(), path("model.ckpt").c_str(), log, &lines), LMT_OK)
        << lmt_last_error();
    EXPECT_EQ(lines, 2);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static void write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
  }

  void SetUp() override {
    ASSERT_EQ(lmt_model_load(path("model.ckpt").c_str(), nullptr, &model_), LMT_OK) << lmt_last_error();
    ASSERT_EQ(lmt_dataset_load(path("data.bin").c_str(), &data_), LMT_OK) << lmt_last_error();
  }
  void TearDown() override {
    lmt_model_free(model_);
    lmt_dataset_free(data_);
  }

  std::vector<int32_t> segment(const lmt_model* m, size_t index) {
    std::vector<int32_t> labels(lmt_dataset_point_count(data_, index), -1);
    EXPECT_EQ(lmt_segment(m, data_, index, labels.data(), labels.size()), LMT_OK) << lmt_last_error();
    return labels;
  }

  static fs::path dir_;
  lmt_model* model_ = nullptr;
  lmt_dataset* data_ = nullptr;
};

fs::path CApi::dir_;

TEST_F(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(lmt_status_name(LMT_OK), "ok");
  EXPECT_STREQ(lmt_status_name(LMT_CHECKPOINT_MISMATCH), "checkpoint_mismatch");
  EXPECT_STREQ(lmt_status_name(static_cast<lmt_status>(99)), "unknown");
  EXPECT_GT(std::string(lmt_version()).size(), 0u);
}

TEST_F(CApi, NullArgumentsAreRejected) {
  lmt_model* m = nullptr;
  EXPECT_EQ(lmt_model_load(nullptr, nullptr, &m), LMT_INVALID_ARGUMENT);
  EXPECT_NE(std::string(lmt_last_error()).find("checkpoint path"), std::string::npos);
  EXPECT_EQ(lmt_segment(nullptr, data_, 0, nullptr, 0), LMT_INVALID_ARGUMENT);
  lmt_text* t = nullptr;
  EXPECT_EQ(lmt_evaluate(model_, nullptr, 0, &t), LMT_INVALID_ARGUMENT);
  EXPECT_EQ(t, nullptr);
}

TEST_F(CApi, SegmentLabelsTheSamplesOwnSweep) {
  ASSERT_EQ(lmt_dataset_size(data_), 2u);
  const auto labels = segment(model_, 1);
  ASSERT_GT(labels.size(), 0u);
  for (int32_t l : labels) {
    EXPECT_GE(l, 0);
    EXPECT_LE(l, 6);
  }
  std::vector<int32_t> small(labels.size() - 1);
  EXPECT_EQ(lmt_segment(model_, data_, 1, small.data(), small.size()), LMT_INVALID_ARGUMENT);
  EXPECT_EQ(lmt_segment(model_, data_, 2, small.data(), small.size()), LMT_OUT_OF_RANGE);
}

TEST_F(CApi, SaveAndReloadGivesIdenticalLabels) {
  ASSERT_EQ(lmt_model_save(model_, path("copy.ckpt").c_str()), LMT_OK);
  lmt_model* copy = nullptr;
  ASSERT_EQ(lmt_model_load(path("copy.ckpt").c_str(), path("train.cfg").c_str(), &copy), LMT_OK)
      << lmt_last_error();
  EXPECT_EQ(lmt_model_config_hash(copy), lmt_model_config_hash(model_));
  EXPECT_EQ(lmt_model_parameter_count(copy), lmt_model_parameter_count(model_));
  EXPECT_EQ(segment(copy, 0), segment(model_, 0));
  lmt_model_free(copy);
}

TEST_F(CApi, MismatchedConfigIsRejected) {
  write("other.cfg", testing_fixtures::micro_config_text(8));
  lmt_model* m = nullptr;
  EXPECT_EQ(lmt_model_load(path("model.ckpt").c_str(), path("other.cfg").c_str(), &m),
            LMT_CHECKPOINT_MISMATCH);
  EXPECT_EQ(m, nullptr);
}

TEST_F(CApi, TextResults) {
  lmt_text* report = nullptr;
  ASSERT_EQ(lmt_evaluate(model_, data_, 1, &report), LMT_OK) << lmt_last_error();
  const std::string r(lmt_text_data(report), lmt_text_size(report));
  EXPECT_NE(r.find("seg.miou = "), std::string::npos);
  EXPECT_NE(r.find("samples = 2"), std::string::npos);
  lmt_text_free(report);

  lmt_text* pred = nullptr;
  ASSERT_EQ(lmt_infer(model_, data_, &pred), LMT_OK);
  const std::string p(lmt_text_data(pred));
  EXPECT_EQ(p.rfind("samples = 2\n", 0), 0u);
  EXPECT_NE(p.find("sample.0.points = " + std::to_string(lmt_dataset_point_count(data_, 0)) + "\n"),
            std::string::npos);
  ASSERT_EQ(lmt_text_write(pred, path("pred.txt").c_str()), LMT_OK);
  EXPECT_EQ(fs::file_size(path("pred.txt")), lmt_text_size(pred));
  lmt_text_free(pred);

  lmt_text* csv = nullptr;
  size_t rows = 0;
  ASSERT_EQ(lmt_inspect_offsets(model_, data_, 0, 0.0, &csv, &rows), LMT_OK) << lmt_last_error();
  EXPECT_GT(rows, 0u);
  EXPECT_EQ(std::string(lmt_text_data(csv)).rfind("module,block,query,", 0), 0u);
  lmt_text_free(csv);
  EXPECT_EQ(lmt_inspect_offsets(model_, data_, 0, 1.5, &csv, &rows), LMT_INVALID_ARGUMENT);
}

}  // namespace
