/*
 * Copyright 2026 The emoseq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "emoseq/emoseq.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <thread>
#include <vector>

#include "emoseq/audio_features.hpp"
#include "emoseq/checkpoint.hpp"
#include "emoseq/emsq_io.hpp"
#include "emoseq/error.hpp"
#include "emoseq/metrics.hpp"
#include "emoseq/model_zoo.hpp"
#include "emoseq/run_config.hpp"
#include "emoseq/synthetic.hpp"
#include "emoseq/training.hpp"
#include "emoseq/video_features.hpp"

struct emoseq_config {
  emoseq::RunConfig cfg;
};

struct emoseq_model {
  emoseq::model::EmotionModel model;
};

struct emoseq_report {
  emoseq::metrics::EvaluationReport report;
};

namespace {

thread_local std::string g_last_error;

emoseq_status set_error(emoseq_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <class Fn>
emoseq_status guarded(Fn&& fn) {
  try {
    fn();
    return EMOSEQ_OK;
  } catch (const emoseq::Error& e) {
    return set_error(static_cast<emoseq_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(EMOSEQ_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(EMOSEQ_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(EMOSEQ_ERR_INTERNAL, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) emoseq::fail(emoseq::ErrorCode::kInvalidArgument, what);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. The
// first failure (lowest index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::filesystem::path prepare_cache_dir(const char* cache_dir) {
  std::filesystem::path dir(cache_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) emoseq::fail(emoseq::ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

// Failures name the offending clip.
template <class Fn>
void for_clip(const emoseq::training::ManifestEntry& e, Fn&& fn) {
  try {
    fn();
  } catch (const emoseq::Error& err) {
    emoseq::fail(err.code(), "clip " + e.clip_id + ": " + err.what());
  }
}

}  // namespace

extern "C" {

const char* emoseq_version(void) { return "1.0.0"; }

const char* emoseq_status_name(emoseq_status status) {
  if (status == EMOSEQ_OK) return "Ok";
  if (status == EMOSEQ_ERR_INTERNAL) return "Internal";
  return emoseq::error_code_name(static_cast<emoseq::ErrorCode>(status));
}

const char* emoseq_last_error(void) { return g_last_error.c_str(); }

void emoseq_string_free(char* s) { std::free(s); }

emoseq_status emoseq_config_create(emoseq_config** out) {
  return guarded([&] {
    require(out != nullptr, "emoseq_config_create: out is NULL");
    *out = new emoseq_config();
  });
}

void emoseq_config_destroy(emoseq_config* cfg) { delete cfg; }

emoseq_status emoseq_config_set(emoseq_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "emoseq_config_set: NULL argument");
    cfg->cfg.set(key, value, emoseq::ConfigSource::kCommandLine);
  });
}

emoseq_status emoseq_config_apply_environment(emoseq_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "emoseq_config_apply_environment: cfg is NULL");
    cfg->cfg.apply_environment();
  });
}

emoseq_status emoseq_config_load_file(emoseq_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg && path, "emoseq_config_load_file: NULL argument");
    cfg->cfg.load_file(path);
  });
}

emoseq_status emoseq_config_get(const emoseq_config* cfg, const char* key, const char** value) {
  return guarded([&] {
    require(cfg && key && value, "emoseq_config_get: NULL argument");
    *value = cfg->cfg.get(key).c_str();
  });
}

char* emoseq_config_dump(const emoseq_config* cfg, int annotate) {
  if (!cfg) return nullptr;
  try {
    return copy_string(cfg->cfg.dump(annotate != 0));
  } catch (...) {
    return nullptr;
  }
}

emoseq_status emoseq_synthesize(const char* out_dir, uint64_t seed, size_t n_speakers,
                                size_t clips_per_speaker, size_t* n_clips) {
  return guarded([&] {
    require(out_dir != nullptr, "emoseq_synthesize: out_dir is NULL");
    emoseq::synthetic::SyntheticOptions opt;
    opt.seed = seed;
    opt.n_speakers = n_speakers;
    opt.clips_per_speaker = clips_per_speaker;
    const auto entries = emoseq::synthetic::generate_synthetic(out_dir, opt);
    if (n_clips) *n_clips = entries.size();
  });
}

emoseq_status emoseq_extract_audio(const char* manifest, const char* cache_dir, size_t* n_clips) {
  return guarded([&] {
    require(manifest && cache_dir, "emoseq_extract_audio: NULL argument");
    const auto entries = emoseq::training::load_manifest(manifest);
    const auto dir = prepare_cache_dir(cache_dir);
    parallel_for(entries.size(), [&](std::size_t i) {
      const auto& e = entries[i];
      for_clip(e, [&] {
        const auto features = emoseq::audio::audio_features(emoseq::audio::load_wav(e.audio_path));
        emoseq::save_emsq(emoseq::training::audio_cache_path(dir, e.clip_id), features.windows);
      });
    });
    if (n_clips) *n_clips = entries.size();
  });
}

emoseq_status emoseq_extract_video(const char* manifest, const char* cache_dir, size_t* n_clips) {
  return guarded([&] {
    require(manifest && cache_dir, "emoseq_extract_video: NULL argument");
    const auto entries = emoseq::training::load_manifest(manifest);
    const auto dir = prepare_cache_dir(cache_dir);
    parallel_for(entries.size(), [&](std::size_t i) {
      const auto& e = entries[i];
      for_clip(e, [&] {
        const auto features = emoseq::video::video_features(e.video_path);
        emoseq::save_emsq(emoseq::training::video_cache_path(dir, e.clip_id), features.values);
      });
    });
    if (n_clips) *n_clips = entries.size();
  });
}

emoseq_status emoseq_split(const char* manifest, size_t n_val, size_t n_test, uint64_t seed,
                           const char* split_out, size_t speaker_counts[3]) {
  return guarded([&] {
    require(manifest && split_out, "emoseq_split: NULL argument");
    const auto entries = emoseq::training::load_manifest(manifest);
    const auto split = emoseq::training::speaker_split(entries, n_val, n_test, seed);
    emoseq::training::save_split(split_out, split);
    if (speaker_counts) {
      speaker_counts[0] = split.train.size();
      speaker_counts[1] = split.val.size();
      speaker_counts[2] = split.test.size();
    }
  });
}

emoseq_status emoseq_model_create(const emoseq_config* cfg, emoseq_model** out) {
  return guarded([&] {
    require(cfg && out, "emoseq_model_create: NULL argument");
    auto m = std::make_unique<emoseq_model>();
    m->model = emoseq::model::EmotionModel(cfg->cfg.model_config(), cfg->cfg.seed());
    *out = m.release();
  });
}

emoseq_status emoseq_model_load(const char* path, emoseq_model** out) {
  return guarded([&] {
    require(path && out, "emoseq_model_load: NULL argument");
    auto m = std::make_unique<emoseq_model>();
    m->model = emoseq::model::load_checkpoint(path);
    *out = m.release();
  });
}

emoseq_status emoseq_model_save(emoseq_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "emoseq_model_save: NULL argument");
    emoseq::model::save_checkpoint(path, model->model);
    emoseq::model::write_model_manifest(path, model->model);
  });
}

void emoseq_model_destroy(emoseq_model* model) { delete model; }

const char* emoseq_model_head(const emoseq_model* model) {
  if (!model || !model->model.built()) return "";
  return emoseq::model::head_name(model->model.config().head).data();
}

size_t emoseq_model_parameter_count(const emoseq_model* model) {
  return model ? model->model.count_parameters() : 0;
}

char* emoseq_model_describe(const emoseq_model* model) {
  if (!model || !model->model.built()) return nullptr;
  try {
    return copy_string(model->model.describe());
  } catch (...) {
    return nullptr;
  }
}

emoseq_status emoseq_train(emoseq_model* model, const emoseq_config* cfg, const char* manifest,
                           const char* split, const char* cache_dir, const char* history_out,
                           emoseq_epoch_callback on_epoch, void* user, size_t* best_epoch) {
  return guarded([&] {
    require(model && cfg && manifest && split && cache_dir, "emoseq_train: NULL argument");
    namespace tr = emoseq::training;
    const auto tc = cfg->cfg.train_config();
    const auto entries = tr::load_manifest(manifest);
    const auto spec = tr::load_split(split);
    const auto train_set = tr::load_features(tr::select(entries, spec, tr::Partition::kTrain), cache_dir);
    const auto val_set = tr::load_features(tr::select(entries, spec, tr::Partition::kVal), cache_dir);
    tr::EpochCallback cb;
    if (on_epoch) {
      cb = [&](const tr::EpochRecord& r) {
        const emoseq_epoch e{r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc};
        return on_epoch(&e, user) != 0;
      };
    }
    const auto result = tr::train(model->model, train_set, val_set, tc, cb);
    if (history_out) tr::save_history_csv(history_out, result.history);
    if (best_epoch) *best_epoch = result.best_epoch;
  });
}

emoseq_status emoseq_evaluate(emoseq_model* model, const char* manifest, const char* split,
                              const char* cache_dir, const char* partition, emoseq_report** out) {
  return guarded([&] {
    require(model && manifest && split && cache_dir && partition && out,
            "emoseq_evaluate: NULL argument");
    namespace tr = emoseq::training;
    const std::string p = partition;
    tr::Partition which;
    if (p == "train") {
      which = tr::Partition::kTrain;
    } else if (p == "val") {
      which = tr::Partition::kVal;
    } else if (p == "test") {
      which = tr::Partition::kTest;
    } else {
      emoseq::fail(emoseq::ErrorCode::kInvalidArgument, "unknown partition '" + p + "'");
    }
    const auto entries = tr::load_manifest(manifest);
    const auto spec = tr::load_split(split);
    const auto clips = tr::load_features(tr::select(entries, spec, which), cache_dir);
    auto r = std::make_unique<emoseq_report>();
    r->report = tr::evaluate(model->model, clips);
    *out = r.release();
  });
}

emoseq_status emoseq_report_load_csv(const char* path, emoseq_report** out) {
  return guarded([&] {
    require(path && out, "emoseq_report_load_csv: NULL argument");
    std::ifstream in(path);
    if (!in) emoseq::fail(emoseq::ErrorCode::kIo, std::string("cannot open report ") + path);
    auto r = std::make_unique<emoseq_report>();
    r->report = emoseq::metrics::read_report_csv(in);
    *out = r.release();
  });
}

emoseq_status emoseq_report_write_csv(const emoseq_report* report, const char* path) {
  return guarded([&] {
    require(report && path, "emoseq_report_write_csv: NULL argument");
    std::ofstream out(path);
    if (!out) emoseq::fail(emoseq::ErrorCode::kIo, std::string("cannot open ") + path + " for writing");
    emoseq::metrics::write_report_csv(out, report->report);
    if (!out) emoseq::fail(emoseq::ErrorCode::kIo, std::string("failed writing ") + path);
  });
}

char* emoseq_report_format(const emoseq_report* report) {
  if (!report) return nullptr;
  try {
    return copy_string(emoseq::metrics::format_report_table(report->report));
  } catch (...) {
    return nullptr;
  }
}

size_t emoseq_report_class_count(const emoseq_report* report) {
  return report ? report->report.per_class.classes.size() : 0;
}

emoseq_status emoseq_report_class(const emoseq_report* report, size_t index, const char** name,
                                  double* precision, double* recall, double* f1, size_t* support) {
  return guarded([&] {
    require(report != nullptr, "emoseq_report_class: report is NULL");
    const auto& classes = report->report.per_class.classes;
    if (index >= classes.size()) {
      emoseq::fail(emoseq::ErrorCode::kIndexOutOfRange, "report class index out of range");
    }
    const auto& c = classes[index];
    if (name) *name = report->report.class_names.at(index).c_str();
    if (precision) *precision = c.precision;
    if (recall) *recall = c.recall;
    if (f1) *f1 = c.f1;
    if (support) *support = static_cast<size_t>(c.support);
  });
}

emoseq_status emoseq_report_aggregate(const emoseq_report* report, double* precision,
                                      double* recall, double* f1) {
  return guarded([&] {
    require(report != nullptr, "emoseq_report_aggregate: report is NULL");
    if (!report->report.aggregate) {
      emoseq::fail(emoseq::ErrorCode::kZeroMetricValue,
                   "harmonic mean undefined: some per-class value is zero");
    }
    const auto& a = *report->report.aggregate;
    if (precision) *precision = a.precision;
    if (recall) *recall = a.recall;
    if (f1) *f1 = a.f1;
  });
}

void emoseq_report_destroy(emoseq_report* report) { delete report; }

emoseq_status emoseq_harmonic_mean(const double* values, size_t n, double* out) {
  return guarded([&] {
    require(values && out, "emoseq_harmonic_mean: NULL argument");
    *out = emoseq::metrics::harmonic_mean(std::span<const double>(values, n));
  });
}

}  // extern "C"
