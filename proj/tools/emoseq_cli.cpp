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

// Command-line front end. Everything goes through the public C interface.

#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emoseq/emoseq.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code_for(emoseq_status s) {
  switch (s) {
    case EMOSEQ_OK:
      return kExitOk;
    case EMOSEQ_ERR_INVALID_ARGUMENT:
    case EMOSEQ_ERR_UNKNOWN_CONFIG_KEY:
      return kExitUsage;
    case EMOSEQ_ERR_NON_FINITE_LOSS:
    case EMOSEQ_ERR_NON_FINITE_GRADIENT:
    case EMOSEQ_ERR_NON_FINITE_VALUE:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

// Thrown out of a subcommand to end it with a given exit code.
struct Exit {
  int code;
};

void check(emoseq_status s, const char* what) {
  if (s == EMOSEQ_OK) return;
  std::fprintf(stderr, "emoseq: %s failed [%s]: %s\n", what, emoseq_status_name(s), emoseq_last_error());
  throw Exit{exit_code_for(s)};
}

[[noreturn]] void usage_error(const std::string& message) {
  std::fprintf(stderr, "emoseq: %s\n", message.c_str());
  throw Exit{kExitUsage};
}

class Config {
 public:
  Config() { check(emoseq_config_create(&cfg_), "config"); }
  ~Config() { emoseq_config_destroy(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;

  emoseq_config* get() { return cfg_; }
  std::string value(const char* key) const {
    const char* v = nullptr;
    check(emoseq_config_get(cfg_, key, &v), "config lookup");
    return v;
  }
  std::string require_path(const char* key, const char* flag) const {
    std::string v = value(key);
    if (v.empty()) usage_error(std::string("missing ") + flag + " (or '" + key + "=' in the config file)");
    return v;
  }
  void log(const char* subcommand) const {
    char* dump = emoseq_config_dump(cfg_, 1);
    std::fprintf(stderr, "emoseq %s: resolved configuration\n%s", subcommand, dump ? dump : "");
    emoseq_string_free(dump);
  }

 private:
  emoseq_config* cfg_ = nullptr;
};

// Command-line options that map one-to-one onto configuration keys.
struct Binding {
  CLI::Option* option;
  std::string key;
  std::string value;
};

class Subcommand {
 public:
  Subcommand(CLI::App& app, const char* name, const char* help) : app_(app.add_subcommand(name, help)) {
    app_->add_option("--config", config_file_, "key=value configuration file");
    auto* set = app_->add_option("--set", overrides_, "override any configuration key (key=value)");
    set->type_name("KEY=VALUE");
  }

  CLI::App* app() { return app_; }

  void bind(const std::string& flag, const std::string& key, const std::string& help) {
    bindings_.push_back({nullptr, key, {}});
    bindings_.back().option = app_->add_option(flag, bindings_.back().value, help);
  }

  // defaults < EMOSEQ_SEED < config file < --set < dedicated flags
  void resolve(Config& cfg) {
    check(emoseq_config_apply_environment(cfg.get()), "EMOSEQ_SEED");
    if (!config_file_.empty()) check(emoseq_config_load_file(cfg.get(), config_file_.c_str()), "config file");
    for (const auto& kv : overrides_) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) usage_error("--set expects KEY=VALUE, got '" + kv + "'");
      check(emoseq_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set");
    }
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) check(emoseq_config_set(cfg.get(), b.key.c_str(), b.value.c_str()), b.key.c_str());
    }
  }

 private:
  CLI::App* app_;
  std::string config_file_;
  std::vector<std::string> overrides_;
  std::deque<Binding> bindings_;  // stable addresses for CLI11
};

// Values were validated by the library when they were set.
std::size_t parse_count(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

void validate_head(const std::string& head) {
  static const char* const kHeads[] = {"lstm", "gru", "transformer", "maxpool"};
  for (const char* h : kHeads) {
    if (head == h) return;
  }
  usage_error("unknown head '" + head + "'; valid heads: lstm, gru, transformer, maxpool");
}

class Model {
 public:
  ~Model() { emoseq_model_destroy(m_); }
  emoseq_model** out() { return &m_; }
  emoseq_model* get() { return m_; }

 private:
  emoseq_model* m_ = nullptr;
};

class Report {
 public:
  ~Report() { emoseq_report_destroy(r_); }
  emoseq_report** out() { return &r_; }
  emoseq_report* get() { return r_; }

 private:
  emoseq_report* r_ = nullptr;
};

void print_report(const emoseq_report* report) {
  char* table = emoseq_report_format(report);
  std::fputs(table ? table : "", stdout);
  emoseq_string_free(table);
}

int on_epoch(const emoseq_epoch* e, void*) {
  std::fprintf(stderr, "epoch %zu: train_loss=%.4f train_acc=%.3f val_loss=%.4f val_acc=%.3f\n",
               e->epoch, e->train_loss, e->train_acc, e->val_loss, e->val_acc);
  return 1;
}

std::string default_history(const std::string& checkpoint) {
  std::filesystem::path p(checkpoint);
  p.replace_extension(".history.csv");
  return p.string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal (audio + video) emotion recognition: features, training, evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", emoseq_version());

  Subcommand synth(app, "synth", "generate the synthetic tone/bar corpus");
  synth.bind("--out", "out", "output directory");
  synth.bind("--seed", "seed", "generator seed");
  synth.bind("--speakers", "n_speakers", "number of speakers");
  synth.bind("--clips-per-speaker", "clips_per_speaker", "clips per speaker");

  Subcommand extract_audio(app, "extract-audio", "write MFCC window caches for every manifest clip");
  extract_audio.bind("--manifest", "manifest", "manifest CSV");
  extract_audio.bind("--cache-dir", "cache_dir", "feature cache directory");

  Subcommand extract_video(app, "extract-video", "write frame-tensor caches for every manifest clip");
  extract_video.bind("--manifest", "manifest", "manifest CSV");
  extract_video.bind("--cache-dir", "cache_dir", "feature cache directory");

  Subcommand split(app, "split", "speaker-disjoint train/val/test split");
  split.bind("--manifest", "manifest", "manifest CSV");
  split.bind("--out", "split", "split file to write");
  split.bind("--n-val", "n_val", "validation speakers");
  split.bind("--n-test", "n_test", "test speakers");
  split.bind("--seed", "seed", "shuffle seed");

  Subcommand train(app, "train", "train a model and write checkpoint + history");
  train.bind("--head", "head", "sequence head: lstm, gru, transformer, maxpool");
  train.bind("--manifest", "manifest", "manifest CSV");
  train.bind("--split", "split", "split file");
  train.bind("--cache-dir", "cache_dir", "feature cache directory");
  train.bind("--checkpoint", "checkpoint", "checkpoint to write (default model.emsk)");
  train.bind("--history", "history", "history CSV (default <checkpoint>.history.csv)");
  train.bind("--batch-size", "batch_size", "mini-batch size");
  train.bind("--lr", "lr", "Adam learning rate");
  train.bind("--epochs", "max_epochs", "maximum epochs");
  train.bind("--patience", "early_stop_patience", "early-stopping patience (epochs)");
  train.bind("--seed", "seed", "initialisation and shuffling seed");

  Subcommand evaluate(app, "evaluate", "score a checkpoint and write the per-class report");
  std::string partition = "test";
  evaluate.bind("--head", "head", "expected head of the checkpoint");
  evaluate.bind("--checkpoint", "checkpoint", "checkpoint to load");
  evaluate.bind("--manifest", "manifest", "manifest CSV");
  evaluate.bind("--split", "split", "split file");
  evaluate.bind("--cache-dir", "cache_dir", "feature cache directory");
  evaluate.bind("--report", "report", "report CSV to write (default report.csv)");
  evaluate.app()->add_option("--partition", partition, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));

  Subcommand report(app, "report", "pretty-print a saved report CSV");
  report.bind("--report", "report", "report CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    Config cfg;
    if (synth.app()->parsed()) {
      synth.resolve(cfg);
      cfg.log("synth");
      const std::string out = cfg.require_path("out", "--out");
      size_t n = 0;
      check(emoseq_synthesize(out.c_str(), std::stoull(cfg.value("seed")),
                              parse_count(cfg.value("n_speakers")),
                              parse_count(cfg.value("clips_per_speaker")), &n),
            "synth");
      std::printf("wrote %zu clips and %s/manifest.csv\n", n, out.c_str());
    } else if (extract_audio.app()->parsed() || extract_video.app()->parsed()) {
      const bool audio = extract_audio.app()->parsed();
      (audio ? extract_audio : extract_video).resolve(cfg);
      cfg.log(audio ? "extract-audio" : "extract-video");
      const std::string manifest = cfg.require_path("manifest", "--manifest");
      const std::string cache = cfg.require_path("cache_dir", "--cache-dir");
      size_t n = 0;
      check(audio ? emoseq_extract_audio(manifest.c_str(), cache.c_str(), &n)
                  : emoseq_extract_video(manifest.c_str(), cache.c_str(), &n),
            audio ? "extract-audio" : "extract-video");
      std::printf("cached %s features for %zu clips in %s\n", audio ? "audio" : "video", n, cache.c_str());
    } else if (split.app()->parsed()) {
      split.resolve(cfg);
      cfg.log("split");
      const std::string manifest = cfg.require_path("manifest", "--manifest");
      const std::string out = cfg.require_path("split", "--out");
      size_t counts[3] = {0, 0, 0};
      check(emoseq_split(manifest.c_str(), parse_count(cfg.value("n_val")),
                         parse_count(cfg.value("n_test")), std::stoull(cfg.value("seed")),
                         out.c_str(), counts),
            "split");
      std::printf("speakers: train %zu, val %zu, test %zu -> %s\n", counts[0], counts[1], counts[2], out.c_str());
    } else if (train.app()->parsed()) {
      train.resolve(cfg);
      validate_head(cfg.value("head"));
      cfg.log("train");
      const std::string manifest = cfg.require_path("manifest", "--manifest");
      const std::string split_file = cfg.require_path("split", "--split");
      const std::string cache = cfg.require_path("cache_dir", "--cache-dir");
      std::string checkpoint = cfg.value("checkpoint");
      if (checkpoint.empty()) checkpoint = "model.emsk";
      std::string history = cfg.value("history");
      if (history.empty()) history = default_history(checkpoint);
      Model model;
      check(emoseq_model_create(cfg.get(), model.out()), "model construction");
      std::fprintf(stderr, "model: head=%s parameters=%zu\n", emoseq_model_head(model.get()),
                   emoseq_model_parameter_count(model.get()));
      size_t best = 0;
      check(emoseq_train(model.get(), cfg.get(), manifest.c_str(), split_file.c_str(), cache.c_str(),
                         history.c_str(), on_epoch, nullptr, &best),
            "train");
      check(emoseq_model_save(model.get(), checkpoint.c_str()), "checkpoint save");
      std::printf("best epoch %zu; checkpoint %s; history %s\n", best, checkpoint.c_str(), history.c_str());
    } else if (evaluate.app()->parsed()) {
      evaluate.resolve(cfg);
      validate_head(cfg.value("head"));
      cfg.log("evaluate");
      const std::string checkpoint = cfg.require_path("checkpoint", "--checkpoint");
      const std::string manifest = cfg.require_path("manifest", "--manifest");
      const std::string split_file = cfg.require_path("split", "--split");
      const std::string cache = cfg.require_path("cache_dir", "--cache-dir");
      std::string report_path = cfg.value("report");
      if (report_path.empty()) report_path = "report.csv";
      Model model;
      check(emoseq_model_load(checkpoint.c_str(), model.out()), "checkpoint load");
      if (cfg.value("head") != emoseq_model_head(model.get())) {
        std::fprintf(stderr, "emoseq: checkpoint %s holds a '%s' head but --head is '%s'\n",
                     checkpoint.c_str(), emoseq_model_head(model.get()), cfg.value("head").c_str());
        return kExitData;
      }
      Report rep;
      check(emoseq_evaluate(model.get(), manifest.c_str(), split_file.c_str(), cache.c_str(),
                            partition.c_str(), rep.out()),
            "evaluate");
      check(emoseq_report_write_csv(rep.get(), report_path.c_str()), "report write");
      print_report(rep.get());
      std::printf("report written to %s\n", report_path.c_str());
    } else if (report.app()->parsed()) {
      report.resolve(cfg);
      const std::string path = cfg.require_path("report", "--report");
      Report rep;
      check(emoseq_report_load_csv(path.c_str(), rep.out()), "report load");
      print_report(rep.get());
    }
  } catch (const Exit& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "emoseq: %s\n", e.what());
    return kExitUsage;
  }
  return kExitOk;
}
