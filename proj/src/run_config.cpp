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

#include "emoseq/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "emoseq/error.hpp"

namespace emoseq {
namespace {

enum class Kind { kSize, kSeed, kReal, kHead, kText };

struct KeySpec {
  const char* key;
  Kind kind;
  const char* default_value;
};

// Paths default to empty: subcommands fall back to their own flags.
constexpr KeySpec kKeys[] = {
    {"seed", Kind::kSeed, "0"},
    {"head", Kind::kHead, "lstm"},
    {"batch_size", Kind::kSize, "16"},
    {"lr", Kind::kReal, "0.0001"},
    {"max_epochs", Kind::kSize, "15"},
    {"early_stop_patience", Kind::kSize, "3"},
    {"n_val", Kind::kSize, "10"},
    {"n_test", Kind::kSize, "10"},
    {"conv_layers", Kind::kSize, "3"},
    {"filters", Kind::kSize, "32"},
    {"kernel", Kind::kSize, "3"},
    {"embed_dim", Kind::kSize, "64"},
    {"recurrent_hidden", Kind::kSize, "128"},
    {"transformer_d_model", Kind::kSize, "64"},
    {"transformer_ffn_hidden", Kind::kSize, "64"},
    {"transformer_heads", Kind::kSize, "4"},
    {"transformer_layers", Kind::kSize, "1"},
    {"post_fusion", Kind::kSize, "128"},
    {"fc1", Kind::kSize, "128"},
    {"fc2", Kind::kSize, "64"},
    {"n_speakers", Kind::kSize, "12"},
    {"clips_per_speaker", Kind::kSize, "30"},
    {"manifest", Kind::kText, ""},
    {"cache_dir", Kind::kText, ""},
    {"split", Kind::kText, ""},
    {"checkpoint", Kind::kText, ""},
    {"history", Kind::kText, ""},
    {"report", Kind::kText, ""},
    {"out", Kind::kText, ""},
};

const KeySpec* find_spec(std::string_view key) {
  for (const auto& k : kKeys) {
    if (key == k.key) return &k;
  }
  return nullptr;
}

template <class T>
std::optional<T> parse_int(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

void validate_value(const KeySpec& spec, std::string_view value) {
  const std::string where = std::string("config key '") + spec.key + "'";
  switch (spec.kind) {
    case Kind::kSize: {
      const auto v = parse_int<std::size_t>(value);
      if (!v || *v == 0) fail(ErrorCode::kInvalidArgument, where + " needs a positive integer, got '" + std::string(value) + "'");
      break;
    }
    case Kind::kSeed:
      if (!parse_int<std::uint64_t>(value)) {
        fail(ErrorCode::kInvalidArgument, where + " needs an unsigned integer, got '" + std::string(value) + "'");
      }
      break;
    case Kind::kReal: {
      char* end = nullptr;
      const std::string s(value);
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v) || v < 0.0) {
        fail(ErrorCode::kInvalidArgument, where + " needs a finite non-negative number, got '" + s + "'");
      }
      break;
    }
    case Kind::kHead:
      if (!model::parse_head(value)) {
        fail(ErrorCode::kInvalidArgument,
             where + ": unknown head '" + std::string(value) + "' (valid: lstm, gru, transformer, maxpool)");
      }
      break;
    case Kind::kText:
      break;
  }
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::string_view config_source_name(ConfigSource s) noexcept {
  switch (s) {
    case ConfigSource::kDefault: return "default";
    case ConfigSource::kEnvironment: return "environment";
    case ConfigSource::kFile: return "file";
    case ConfigSource::kCommandLine: return "command line";
  }
  return "unknown";
}

RunConfig::RunConfig() {
  for (const auto& k : kKeys) entries_[k.key] = {k.default_value, ConfigSource::kDefault};
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> v;
    for (const auto& k : kKeys) v.emplace_back(k.key);
    return v;
  }();
  return all;
}

bool RunConfig::is_known(std::string_view key) { return find_spec(key) != nullptr; }

void RunConfig::set(std::string_view key, std::string_view value, ConfigSource source) {
  const KeySpec* spec = find_spec(key);
  if (!spec) fail(ErrorCode::kUnknownConfigKey, "unknown config key '" + std::string(key) + "'");
  validate_value(*spec, value);
  auto it = entries_.find(key);
  if (source < it->second.source) return;
  it->second = {std::string(value), source};
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(ErrorCode::kUnknownConfigKey, "unknown config key '" + std::string(key) + "'");
  return it->second.value;
}

ConfigSource RunConfig::source(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(ErrorCode::kUnknownConfigKey, "unknown config key '" + std::string(key) + "'");
  return it->second.source;
}

void RunConfig::apply_environment() {
  if (const char* seed = std::getenv("EMOSEQ_SEED"); seed && *seed) {
    try {
      set("seed", seed, ConfigSource::kEnvironment);
    } catch (const Error& e) {
      fail(ErrorCode::kInvalidArgument, std::string("EMOSEQ_SEED: ") + e.what());
    }
  }
}

void RunConfig::load(std::istream& in, ConfigSource source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kInvalidArgument, "config line " + std::to_string(line_no) + " is not key=value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    try {
      set(key, value, source);
    } catch (const Error& e) {
      fail(e.code(), "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file " + path.string());
  load(in, ConfigSource::kFile);
}

std::string RunConfig::dump(bool annotate) const {
  std::ostringstream out;
  for (const auto& k : kKeys) {
    const Entry& e = entries_.at(k.key);
    out << k.key << '=' << e.value;
    if (annotate) out << "  # " << config_source_name(e.source);
    out << '\n';
  }
  return out.str();
}

std::uint64_t RunConfig::seed() const { return *parse_int<std::uint64_t>(get("seed")); }

std::size_t RunConfig::get_size(std::string_view key) const {
  const KeySpec* spec = find_spec(key);
  if (!spec || spec->kind != Kind::kSize) {
    fail(ErrorCode::kInvalidArgument, "config key '" + std::string(key) + "' is not an integer key");
  }
  return *parse_int<std::size_t>(get(key));
}

double RunConfig::get_double(std::string_view key) const {
  return std::strtod(get(key).c_str(), nullptr);
}

std::filesystem::path RunConfig::get_path(std::string_view key) const { return get(key); }

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig cfg;
  cfg.head = *model::parse_head(get("head"));
  cfg.backbone.conv_layers = get_size("conv_layers");
  cfg.backbone.filters = get_size("filters");
  cfg.backbone.kernel = get_size("kernel");
  cfg.backbone.embed_dim = get_size("embed_dim");
  cfg.heads.recurrent_hidden = get_size("recurrent_hidden");
  cfg.heads.transformer_d_model = get_size("transformer_d_model");
  cfg.heads.transformer_ffn_hidden = get_size("transformer_ffn_hidden");
  cfg.heads.transformer_heads = get_size("transformer_heads");
  cfg.heads.transformer_layers = get_size("transformer_layers");
  cfg.classifier.post_fusion = get_size("post_fusion");
  cfg.classifier.fc1 = get_size("fc1");
  cfg.classifier.fc2 = get_size("fc2");
  cfg.validate();
  return cfg;
}

training::TrainConfig RunConfig::train_config() const {
  training::TrainConfig cfg;
  cfg.batch_size = get_size("batch_size");
  cfg.lr = get_double("lr");
  cfg.max_epochs = get_size("max_epochs");
  cfg.early_stop_patience = get_size("early_stop_patience");
  cfg.seed = seed();
  cfg.validate();
  return cfg;
}

}  // namespace emoseq
