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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emoseq/metrics.hpp"
#include "emoseq/model_zoo.hpp"
#include "emoseq/tensor.hpp"

namespace emoseq::training {

inline constexpr std::size_t kNumClasses = 6;
// Label index -> canonical name.
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "angry", "happy", "sad", "neutral", "disgust", "fear"};

std::vector<std::string> class_names();
// Accepts "0".."5" or a canonical name in any letter case.
std::optional<int> parse_label(std::string_view text);

struct ManifestEntry {
  std::string clip_id;
  std::string speaker_id;
  int label = 0;
  std::filesystem::path audio_path;
  std::filesystem::path video_path;
};

// Header: clip_id,speaker_id,label,audio_path,video_path. Relative paths are
// resolved against base_dir.
std::vector<ManifestEntry> read_manifest(std::istream& in, const std::filesystem::path& base_dir);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, std::span<const ManifestEntry> entries);
void save_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);

enum class Partition { kTrain, kVal, kTest };
std::string_view partition_name(Partition p) noexcept;

struct SplitSpec {
  std::set<std::string> train;
  std::set<std::string> val;
  std::set<std::string> test;
  std::uint64_t seed = 0;

  const std::set<std::string>& speakers(Partition p) const;
};

// Shuffles the distinct speakers with the seeded generator: the first n_test
// become test, the next n_val validation, everything else train.
SplitSpec speaker_split(std::span<const ManifestEntry> manifest, std::size_t n_val = 10,
                        std::size_t n_test = 10, std::uint64_t seed = 0);

// CSV "partition,speaker_id" rows, preceded by a "# seed=<n>" line.
void write_split(std::ostream& out, const SplitSpec& split);
SplitSpec read_split(std::istream& in);
void save_split(const std::filesystem::path& path, const SplitSpec& split);
SplitSpec load_split(const std::filesystem::path& path);

std::vector<ManifestEntry> select(std::span<const ManifestEntry> manifest, const SplitSpec& split,
                                  Partition partition);

struct TrainConfig {
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::size_t max_epochs = 15;
  std::size_t early_stop_patience = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClipFeatures {
  std::string clip_id;
  int label = 0;
  Tensor audio;  // windows x coefficients x window
  Tensor video;  // timesteps x height x width
};

std::filesystem::path audio_cache_path(const std::filesystem::path& cache_dir,
                                       const std::string& clip_id);
std::filesystem::path video_cache_path(const std::filesystem::path& cache_dir,
                                       const std::string& clip_id);

// Reads both caches for every entry; MissingFeatures names the first gap.
std::vector<ClipFeatures> load_features(std::span<const ManifestEntry> entries,
                                        const std::filesystem::path& cache_dir);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);
void save_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

// Validation-loss early stopping with strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when the epoch is the new best.
  bool observe(std::size_t epoch, double val_loss);
  bool should_stop() const noexcept { return stale_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = 0.0;
  bool seen_ = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;   // by the patience rule
  bool stopped_by_callback = false;
};

// Return false to end training after the reported epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

// The model keeps the weights of the best validation epoch on return.
TrainResult train(model::EmotionModel& model, std::span<const ClipFeatures> train_set,
                  std::span<const ClipFeatures> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct EvalResult {
  std::vector<int> predictions;
  std::vector<int> labels;
  double loss = 0.0;      // mean cross-entropy
  double accuracy = 0.0;
};

// Eval-mode pass (running batchnorm statistics). EmptySplit on no clips.
EvalResult evaluate_clips(model::EmotionModel& model, std::span<const ClipFeatures> clips);
metrics::EvaluationReport evaluate(model::EmotionModel& model, std::span<const ClipFeatures> clips);

}  // namespace emoseq::training
