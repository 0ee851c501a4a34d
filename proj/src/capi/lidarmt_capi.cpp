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

#include "lidarmt/lidarmt.h"

#include <exception>
#include <new>
#include <string>

#include "lidarmt/binio.hpp"
#include "lidarmt/config.hpp"
#include "lidarmt/data.hpp"
#include "lidarmt/error.hpp"
#include "lidarmt/kvfile.hpp"
#include "lidarmt/model.hpp"
#include "lidarmt/runner.hpp"
#include "lidarmt/train.hpp"

struct lmt_model {
  lmt::model::Model model;
  lmt::ckpt::Checkpoint optimizer;  // moments carried through save
};

struct lmt_dataset {
  std::vector<lmt::data::SceneSample> samples;
};

struct lmt_text {
  std::string text;
};

namespace {

thread_local std::string g_last_error;

lmt_status set_error(lmt_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
lmt_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return LMT_OK;
  } catch (const lmt::Error& e) {
    return set_error(static_cast<lmt_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(LMT_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(LMT_INTERNAL, e.what());
  }
}

void need(const void* p, const char* what) {
  lmt::require(p != nullptr, lmt::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

lmt_status make_text(std::string s, lmt_text** out) {
  return guarded([&] {
    need(out, "output handle");
    *out = new lmt_text{std::move(s)};
  });
}

}  // namespace

extern "C" {

const char* lmt_version(void) { return "0.1.0"; }

const char* lmt_status_name(lmt_status status) {
  if (status == LMT_OK) return "ok";
  if (status < LMT_INVALID_ARGUMENT || status > LMT_INTERNAL) return "unknown";
  return lmt::error_code_name(static_cast<lmt::ErrorCode>(static_cast<int>(status)));
}

const char* lmt_last_error(void) { return g_last_error.c_str(); }

lmt_status lmt_generate_dataset(const char* spec_path, uint64_t seed_first, uint64_t seed_last,
                                const char* out_path) {
  return guarded([&] {
    need(spec_path, "spec path");
    need(out_path, "output path");
    lmt::require(seed_last >= seed_first, lmt::ErrorCode::kInvalidArgument,
                 "seed range is empty");
    const auto spec = lmt::data::SceneSpec::from_file(lmt::kv::KeyValueFile::load(spec_path));
    std::vector<lmt::data::SceneSample> samples;
    for (uint64_t s = seed_first;; ++s) {
      samples.push_back(lmt::data::generate_scene(s, spec));
      samples.back().frame_id = static_cast<std::int32_t>(s);
      if (s == seed_last) break;
    }
    lmt::data::write_dataset(samples, out_path);
  });
}

lmt_status lmt_dataset_load(const char* path, lmt_dataset** out) {
  return guarded([&] {
    need(path, "dataset path");
    need(out, "output handle");
    *out = new lmt_dataset{lmt::data::read_dataset(path)};
  });
}

size_t lmt_dataset_size(const lmt_dataset* d) { return d ? d->samples.size() : 0; }

size_t lmt_dataset_point_count(const lmt_dataset* d, size_t index) {
  if (!d || index >= d->samples.size()) return 0;
  return d->samples[index].points.size();
}

void lmt_dataset_free(lmt_dataset* d) { delete d; }

lmt_status lmt_train(const char* config_path, const char* out_path, lmt_log_fn log, void* user) {
  return guarded([&] {
    need(config_path, "config path");
    need(out_path, "output path");
    const auto cfg = lmt::config::Config::load(config_path);
    const auto samples = lmt::train::training_data(cfg);
    const auto result = lmt::train::train(
        cfg, samples,
        [&](const lmt::train::EpochLog& e) {
          if (log) log(lmt::train::format_epoch(e).c_str(), user);
        },
        std::string(out_path) + ".diverged.txt");
    lmt::ckpt::save(result.checkpoint, out_path);
  });
}

lmt_status lmt_model_load(const char* checkpoint_path, const char* config_path, lmt_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint path");
    need(out, "output handle");
    auto c = lmt::ckpt::load(checkpoint_path);
    lmt::model::Model m;
    if (config_path) {
      const auto runtime = lmt::config::Config::load(config_path);
      m = lmt::model::restore(c, &runtime);
    } else {
      m = lmt::model::restore(c);
    }
    c.params.clear();
    *out = new lmt_model{std::move(m), std::move(c)};
  });
}

lmt_status lmt_model_save(const lmt_model* m, const char* checkpoint_path) {
  return guarded([&] {
    need(m, "model");
    need(checkpoint_path, "checkpoint path");
    auto c = lmt::model::snapshot(m->model);
    c.step = m->optimizer.step;
    c.adam_m = m->optimizer.adam_m;
    c.adam_v = m->optimizer.adam_v;
    lmt::ckpt::save(c, checkpoint_path);
  });
}

size_t lmt_model_parameter_count(const lmt_model* m) { return m ? m->model.store.scalar_count() : 0; }

uint64_t lmt_model_config_hash(const lmt_model* m) { return m ? m->model.cfg.hash() : 0; }

void lmt_model_free(lmt_model* m) { delete m; }

lmt_status lmt_segment(const lmt_model* m, const lmt_dataset* d, size_t index, int32_t* labels_out,
                       size_t capacity) {
  return guarded([&] {
    need(m, "model");
    need(d, "dataset");
    lmt::require(index < d->samples.size(), lmt::ErrorCode::kOutOfRange, "sample index out of range");
    const std::size_t n = d->samples[index].points.size();
    lmt::require(capacity >= n, lmt::ErrorCode::kInvalidArgument,
                 "label buffer holds " + std::to_string(capacity) + " entries, " +
                     std::to_string(n) + " needed");
    need(labels_out, "label buffer");
    const auto s = lmt::model::prepare(d->samples[index], m->model.cfg);
    const auto p = lmt::model::predict(m->model, s);
    std::copy(p.point_labels.begin(), p.point_labels.end(), labels_out);
  });
}

lmt_status lmt_evaluate(const lmt_model* m, const lmt_dataset* d, int key_value, lmt_text** report) {
  std::string text;
  const lmt_status s = guarded([&] {
    need(m, "model");
    need(d, "dataset");
    const auto r = lmt::run::evaluate(m->model, d->samples);
    text = key_value ? lmt::metrics::format_kv(r) : lmt::metrics::format_text(r);
  });
  return s == LMT_OK ? make_text(std::move(text), report) : s;
}

lmt_status lmt_infer(const lmt_model* m, const lmt_dataset* d, lmt_text** predictions) {
  std::string text;
  const lmt_status s = guarded([&] {
    need(m, "model");
    need(d, "dataset");
    text = lmt::run::infer(m->model, d->samples);
  });
  return s == LMT_OK ? make_text(std::move(text), predictions) : s;
}

lmt_status lmt_inspect_offsets(const lmt_model* m, const lmt_dataset* d, size_t index,
                               double quantile, lmt_text** csv, size_t* rows) {
  lmt::run::OffsetDump dump;
  const lmt_status s = guarded([&] {
    need(m, "model");
    need(d, "dataset");
    lmt::require(index < d->samples.size(), lmt::ErrorCode::kOutOfRange, "sample index out of range");
    dump = lmt::run::inspect_offsets(m->model, d->samples[index], quantile);
  });
  if (s != LMT_OK) return s;
  if (rows) *rows = dump.rows;
  return make_text(std::move(dump.csv), csv);
}

const char* lmt_text_data(const lmt_text* t) { return t ? t->text.c_str() : ""; }

size_t lmt_text_size(const lmt_text* t) { return t ? t->text.size() : 0; }

void lmt_text_free(lmt_text* t) { delete t; }

lmt_status lmt_text_write(const lmt_text* t, const char* path) {
  return guarded([&] {
    need(t, "text");
    need(path, "path");
    lmt::io::write_file(path, std::vector<std::uint8_t>(t->text.begin(), t->text.end()));
  });
}

}  // extern "C"
