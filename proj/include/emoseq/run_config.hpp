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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emoseq/model_zoo.hpp"
#include "emoseq/training.hpp"

namespace emoseq {

// Where a resolved value came from, lowest precedence first.
enum class ConfigSource { kDefault, kEnvironment, kFile, kCommandLine };
std::string_view config_source_name(ConfigSource s) noexcept;

// Flat key=value run configuration. Every key is known in advance; setting
// an unknown key or an unparsable value fails. A value from a lower
// precedence source never replaces one from a higher source.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<std::string>& keys();
  static bool is_known(std::string_view key);

  void set(std::string_view key, std::string_view value,
           ConfigSource source = ConfigSource::kCommandLine);
  const std::string& get(std::string_view key) const;
  ConfigSource source(std::string_view key) const;

  // Reads EMOSEQ_SEED when present.
  void apply_environment();
  // '#' starts a comment; blank lines are ignored.
  void load(std::istream& in, ConfigSource source = ConfigSource::kFile);
  void load_file(const std::filesystem::path& path);

  // One "key=value" line per key, in keys() order; `annotate` appends the source.
  std::string dump(bool annotate = false) const;

  std::uint64_t seed() const;
  std::size_t get_size(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::filesystem::path get_path(std::string_view key) const;

  model::ModelConfig model_config() const;
  training::TrainConfig train_config() const;

 private:
  struct Entry {
    std::string value;
    ConfigSource source;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace emoseq
