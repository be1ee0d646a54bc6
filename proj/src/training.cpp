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

#include "emoseq/training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "emoseq/emsq_io.hpp"
#include "emoseq/error.hpp"
#include "emoseq/rng.hpp"

namespace emoseq::training {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Comma-separated fields; double quotes may wrap a field and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool read_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) return true;
  }
  return false;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<std::string> class_names() { return {kClassNames.begin(), kClassNames.end()}; }

std::optional<int> parse_label(std::string_view text) {
  const std::string t = trim(text);
  if (t.size() == 1 && t[0] >= '0' && t[0] < static_cast<char>('0' + kNumClasses)) return t[0] - '0';
  std::string lower(t);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == lower) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::vector<ManifestEntry> read_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  std::string line;
  if (!read_data_line(in, line)) fail(ErrorCode::kMalformedFile, "manifest is empty");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected = {"clip_id", "speaker_id", "label", "audio_path",
                                             "video_path"};
  if (header != expected) {
    fail(ErrorCode::kMalformedFile,
         "manifest header must be clip_id,speaker_id,label,audio_path,video_path");
  }
  std::vector<ManifestEntry> entries;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (read_data_line(in, line)) {
    ++line_no;
    const auto f = split_csv_line(line);
    const std::string where = "manifest line " + std::to_string(line_no);
    if (f.size() != 5) fail(ErrorCode::kMalformedFile, where + ": expected 5 fields");
    for (const auto& field : f) {
      if (field.empty()) fail(ErrorCode::kMalformedFile, where + ": empty field");
    }
    const auto label = parse_label(f[2]);
    if (!label) fail(ErrorCode::kLabelOutOfRange, where + ": unknown label '" + f[2] + "'");
    if (!seen.insert(f[0]).second) {
      fail(ErrorCode::kMalformedFile, where + ": duplicate clip_id '" + f[0] + "'");
    }
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    entries.push_back({f[0], f[1], *label, resolve(f[3]), resolve(f[4])});
  }
  return entries;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open manifest " + path.string());
  return read_manifest(in, path.parent_path());
}

void write_manifest(std::ostream& out, std::span<const ManifestEntry> entries) {
  out << "clip_id,speaker_id,label,audio_path,video_path\n";
  for (const auto& e : entries) {
    out << csv_field(e.clip_id) << ',' << csv_field(e.speaker_id) << ','
        << kClassNames.at(static_cast<std::size_t>(e.label)) << ','
        << csv_field(e.audio_path.generic_string()) << ','
        << csv_field(e.video_path.generic_string()) << '\n';
  }
}

void save_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_manifest(out, entries);
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

std::string_view partition_name(Partition p) noexcept {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kVal: return "val";
    case Partition::kTest: return "test";
  }
  return "unknown";
}

const std::set<std::string>& SplitSpec::speakers(Partition p) const {
  switch (p) {
    case Partition::kTrain: return train;
    case Partition::kVal: return val;
    case Partition::kTest: return test;
  }
  fail(ErrorCode::kInvalidArgument, "unknown partition");
}

SplitSpec speaker_split(std::span<const ManifestEntry> manifest, std::size_t n_val,
                        std::size_t n_test, std::uint64_t seed) {
  std::set<std::string> distinct;
  for (const auto& e : manifest) distinct.insert(e.speaker_id);
  if (distinct.size() < n_val + n_test + 1) {
    fail(ErrorCode::kTooFewSpeakers, "need at least " + std::to_string(n_val + n_test + 1) +
                                         " speakers, manifest has " +
                                         std::to_string(distinct.size()));
  }
  std::vector<std::string> speakers(distinct.begin(), distinct.end());
  Rng rng(seed);
  for (std::size_t i = speakers.size() - 1; i > 0; --i) {
    std::swap(speakers[i], speakers[rng.below(i + 1)]);
  }
  SplitSpec split;
  split.seed = seed;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    if (i < n_test) {
      split.test.insert(speakers[i]);
    } else if (i < n_test + n_val) {
      split.val.insert(speakers[i]);
    } else {
      split.train.insert(speakers[i]);
    }
  }
  return split;
}

void write_split(std::ostream& out, const SplitSpec& split) {
  out << "# seed=" << split.seed << "\n";
  out << "partition,speaker_id\n";
  for (Partition p : {Partition::kTrain, Partition::kVal, Partition::kTest}) {
    for (const auto& s : split.speakers(p)) out << partition_name(p) << ',' << csv_field(s) << '\n';
  }
}

SplitSpec read_split(std::istream& in) {
  SplitSpec split;
  std::string line;
  bool header_seen = false;
  std::map<std::string, std::string> owner;
  while (read_data_line(in, line)) {
    const std::string t = trim(line);
    if (t.rfind("# seed=", 0) == 0) {
      try {
        split.seed = std::stoull(t.substr(7));
      } catch (const std::exception&) {
        fail(ErrorCode::kMalformedFile, "split file has an invalid seed line");
      }
      continue;
    }
    if (t[0] == '#') continue;
    const auto f = split_csv_line(line);
    if (!header_seen) {
      if (f != std::vector<std::string>{"partition", "speaker_id"}) {
        fail(ErrorCode::kMalformedFile, "split header must be partition,speaker_id");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 2 || f[1].empty()) fail(ErrorCode::kMalformedFile, "bad split row: " + line);
    auto [it, fresh] = owner.emplace(f[1], f[0]);
    if (!fresh && it->second != f[0]) {
      fail(ErrorCode::kMalformedFile, "speaker '" + f[1] + "' appears in two partitions");
    }
    if (f[0] == "train") {
      split.train.insert(f[1]);
    } else if (f[0] == "val") {
      split.val.insert(f[1]);
    } else if (f[0] == "test") {
      split.test.insert(f[1]);
    } else {
      fail(ErrorCode::kMalformedFile, "unknown partition '" + f[0] + "'");
    }
  }
  if (!header_seen) fail(ErrorCode::kMalformedFile, "split file is empty");
  return split;
}

void save_split(const std::filesystem::path& path, const SplitSpec& split) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_split(out, split);
}

SplitSpec load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open split " + path.string());
  return read_split(in);
}

std::vector<ManifestEntry> select(std::span<const ManifestEntry> manifest, const SplitSpec& split,
                                  Partition partition) {
  const auto& keep = split.speakers(partition);
  std::vector<ManifestEntry> out;
  for (const auto& e : manifest) {
    if (keep.count(e.speaker_id)) out.push_back(e);
  }
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0 || max_epochs == 0 || early_stop_patience == 0) {
    fail(ErrorCode::kInvalidArgument, "batch_size, max_epochs and early_stop_patience must be positive");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    fail(ErrorCode::kInvalidArgument, "learning rate must be finite and non-negative");
  }
}

std::filesystem::path audio_cache_path(const std::filesystem::path& cache_dir,
                                       const std::string& clip_id) {
  return cache_dir / (clip_id + ".audio.emsq");
}

std::filesystem::path video_cache_path(const std::filesystem::path& cache_dir,
                                       const std::string& clip_id) {
  return cache_dir / (clip_id + ".video.emsq");
}

std::vector<ClipFeatures> load_features(std::span<const ManifestEntry> entries,
                                        const std::filesystem::path& cache_dir) {
  std::vector<ClipFeatures> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const auto a = audio_cache_path(cache_dir, e.clip_id);
    const auto v = video_cache_path(cache_dir, e.clip_id);
    for (const auto& p : {a, v}) {
      if (!std::filesystem::exists(p)) {
        fail(ErrorCode::kMissingFeatures,
             "clip " + e.clip_id + ": feature cache " + p.string() + " not found");
      }
    }
    out.push_back({e.clip_id, e.label, load_emsq(a), load_emsq(v)});
  }
  return out;
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.train_acc,
                  r.val_loss, r.val_acc);
    out << buf;
  }
}

void save_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_history_csv(out, history);
}

bool EarlyStopping::observe(std::size_t epoch, double val_loss) {
  if (!seen_ || val_loss < best_loss_) {
    seen_ = true;
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

namespace {

struct ClipStep {
  double loss;
  bool correct;
};

// One clip forward (and optionally backward with the given loss scale).
ClipStep run_clip(model::EmotionModel& model, const ClipFeatures& clip, ad::Mode mode,
                  double grad_scale) {
  const bool training = mode == ad::Mode::kTrain;
  ad::Tape tape(training);
  try {
    const ad::Var logits = model.forward(tape, clip.audio, clip.video, mode);
    const int label[] = {clip.label};
    const ad::Var loss = ad::softmax_cross_entropy(tape, logits, label);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      fail(ErrorCode::kNonFiniteLoss, "non-finite loss on clip " + clip.clip_id);
    }
    if (training) tape.backward(ad::scale(tape, loss, grad_scale));
    const bool correct = static_cast<int>(argmax(logits.value().values())) == clip.label;
    return {value, correct};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNonFiniteValue || e.code() == ErrorCode::kNonFiniteGradient) {
      fail(ErrorCode::kNonFiniteLoss, "clip " + clip.clip_id + ": " + e.what());
    }
    if (e.code() == ErrorCode::kShapeMismatch || e.code() == ErrorCode::kLabelOutOfRange) {
      fail(e.code(), "clip " + clip.clip_id + ": " + e.what());
    }
    throw;
  }
}

}  // namespace

TrainResult train(model::EmotionModel& model, std::span<const ClipFeatures> train_set,
                  std::span<const ClipFeatures> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (!model.built()) fail(ErrorCode::kModelNotBuilt, "cannot train an unbuilt model");
  if (train_set.empty()) fail(ErrorCode::kEmptySplit, "training partition has no clips");
  if (val_set.empty()) fail(ErrorCode::kEmptySplit, "validation partition has no clips");

  ad::Adam& opt = model.optimizer();
  opt.set_learning_rate(cfg.lr);
  opt.zero_grad();

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  EarlyStopping stopper(cfg.early_stop_patience);
  model::ModelState best = model.snapshot();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t j = start; j < end; ++j) {
        const ClipStep s = run_clip(model, train_set[order[j]], ad::Mode::kTrain, scale);
        loss_sum += s.loss;
        correct += s.correct ? 1 : 0;
      }
      try {
        opt.step();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFiniteGradient) throw;
        fail(ErrorCode::kNonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }

    const EvalResult val = evaluate_clips(model, val_set);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.val_loss = val.loss;
    rec.val_acc = val.accuracy;
    result.history.push_back(rec);

    if (stopper.observe(epoch, val.loss)) best = model.snapshot();
    if (on_epoch && !on_epoch(rec)) {
      result.stopped_by_callback = true;
      break;
    }
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
  }
  model.restore(best);
  result.best_epoch = stopper.best_epoch();
  return result;
}

EvalResult evaluate_clips(model::EmotionModel& model, std::span<const ClipFeatures> clips) {
  if (clips.empty()) fail(ErrorCode::kEmptySplit, "evaluation partition has no clips");
  EvalResult r;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& clip : clips) {
    ad::Tape tape(false);
    const ad::Var logits = model.forward(tape, clip.audio, clip.video, ad::Mode::kEval);
    const int label[] = {clip.label};
    loss_sum += ad::softmax_cross_entropy(tape, logits, label).item();
    const int pred = static_cast<int>(argmax(logits.value().values()));
    r.predictions.push_back(pred);
    r.labels.push_back(clip.label);
    correct += pred == clip.label ? 1 : 0;
  }
  r.loss = loss_sum / static_cast<double>(clips.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(clips.size());
  return r;
}

metrics::EvaluationReport evaluate(model::EmotionModel& model, std::span<const ClipFeatures> clips) {
  const EvalResult r = evaluate_clips(model, clips);
  const auto cm = metrics::confusion(r.predictions, r.labels, model.config().classifier.num_classes);
  return metrics::make_report(cm, class_names());
}

}  // namespace emoseq::training
