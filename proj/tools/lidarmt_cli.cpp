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

// Command-line front end over the C API. Failures print one line
//   error code=<name> status=<n> message="<text>"
// to stderr and exit with the status number (64 for usage errors).

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lidarmt/lidarmt.h"

namespace {

constexpr int kUsageExit = 64;

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n' || c == '\r') {
      out += ' ';
      continue;
    }
    out += c;
  }
  return out + "\"";
}

int report(lmt_status s) {
  if (s == LMT_OK) return 0;
  std::cerr << "error code=" << lmt_status_name(s) << " status=" << static_cast<int>(s)
            << " message=" << quote(lmt_last_error()) << '\n';
  return static_cast<int>(s);
}

int usage(const std::string& msg) {
  std::cerr << "error code=usage status=" << kUsageExit << " message=" << quote(msg) << '\n';
  return kUsageExit;
}

bool parse_seeds(const std::string& text, std::uint64_t& first, std::uint64_t& last) {
  const auto dots = text.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      first = last = std::stoull(text, &used);
      return used == text.size();
    }
    const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
    first = std::stoull(a, &used);
    if (used != a.size()) return false;
    last = std::stoull(b, &used);
    return used == b.size() && last >= first;
  } catch (const std::exception&) {
    return false;
  }
}

void print_line(const char* line, void*) { std::cout << line << std::endl; }

struct ModelAndData {
  lmt_model* model = nullptr;
  lmt_dataset* data = nullptr;
  ~ModelAndData() {
    lmt_model_free(model);
    lmt_dataset_free(data);
  }
  lmt_status open(const std::string& ckpt, const std::string& config, const std::string& input) {
    lmt_status s = lmt_model_load(ckpt.c_str(), config.empty() ? nullptr : config.c_str(), &model);
    if (s != LMT_OK) return s;
    return lmt_dataset_load(input.c_str(), &data);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task LiDAR segmentation and detection on synthetic scenes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lmt_version()));

  std::string spec, seeds, out, config, ckpt, data, input;
  double quantile = 0.0;
  std::size_t index = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset file");
  gen->add_option("--spec", spec, "Scene spec (key-value file)")->required();
  gen->add_option("--seeds", seeds, "Seed range a..b (inclusive)")->required();
  gen->add_option("--out", out, "Output dataset file")->required();

  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--config", config, "Experiment config")->required();
  tr->add_option("--out", out, "Output checkpoint")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--data", data, "Dataset file")->required();
  ev->add_option("--config", config, "Runtime config; its model hash must match");
  ev->add_option("--out", out, "Also write the report as key = value lines");

  auto* inf = app.add_subcommand("infer", "Write per-point labels and boxes");
  inf->add_option("--ckpt", ckpt, "Checkpoint")->required();
  inf->add_option("--input", input, "Dataset file")->required();
  inf->add_option("--out", out, "Output predictions")->required();
  inf->add_option("--config", config, "Runtime config; its model hash must match");

  auto* ins = app.add_subcommand("inspect-offsets", "Dump deformable-attention sampling points");
  ins->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ins->add_option("--input", input, "Dataset file")->required();
  ins->add_option("--quantile", quantile, "Keep weights at or above this per-block quantile")
      ->check(CLI::Range(0.0, 1.0));
  ins->add_option("--index", index, "Sample index within the dataset");
  ins->add_option("--out", out, "Output CSV")->required();
  ins->add_option("--config", config, "Runtime config; its model hash must match");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return usage(e.what());
  }

  if (*gen) {
    std::uint64_t first = 0, last = 0;
    if (!parse_seeds(seeds, first, last)) return usage("--seeds expects a..b with a <= b");
    const lmt_status s = lmt_generate_dataset(spec.c_str(), first, last, out.c_str());
    if (s == LMT_OK) std::cout << "wrote " << (last - first + 1) << " samples to " << out << '\n';
    return report(s);
  }
  if (*tr) {
    const lmt_status s = lmt_train(config.c_str(), out.c_str(), print_line, nullptr);
    if (s == LMT_OK) std::cout << "wrote checkpoint " << out << '\n';
    return report(s);
  }

  ModelAndData md;
  if (*ev) {
    lmt_status s = md.open(ckpt, config, data);
    lmt_text* text = nullptr;
    if (s == LMT_OK) s = lmt_evaluate(md.model, md.data, 0, &text);
    if (s == LMT_OK) std::cout << lmt_text_data(text);
    lmt_text_free(text);
    if (s == LMT_OK && !out.empty()) {
      text = nullptr;
      s = lmt_evaluate(md.model, md.data, 1, &text);
      if (s == LMT_OK) s = lmt_text_write(text, out.c_str());
      lmt_text_free(text);
    }
    return report(s);
  }
  if (*inf) {
    lmt_status s = md.open(ckpt, config, input);
    lmt_text* text = nullptr;
    if (s == LMT_OK) s = lmt_infer(md.model, md.data, &text);
    if (s == LMT_OK) s = lmt_text_write(text, out.c_str());
    lmt_text_free(text);
    if (s == LMT_OK) std::cout << "wrote predictions for " << lmt_dataset_size(md.data) << " samples to " << out << '\n';
    return report(s);
  }
  lmt_status s = md.open(ckpt, config, input);
  lmt_text* text = nullptr;
  std::size_t rows = 0;
  if (s == LMT_OK) s = lmt_inspect_offsets(md.model, md.data, index, quantile, &text, &rows);
  if (s == LMT_OK) s = lmt_text_write(text, out.c_str());
  lmt_text_free(text);
  if (s == LMT_OK) std::cout << "wrote " << rows << " sampling points to " << out << '\n';
  return report(s);
}
