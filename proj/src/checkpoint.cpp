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

#include "emoseq/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "emoseq/emsq_io.hpp"
#include "emoseq/error.hpp"

namespace emoseq::model {
namespace {

constexpr char kMagic[4] = {'E', 'M', 'S', 'K'};
constexpr std::uint32_t kMaxMetadataBytes = 1u << 20;

std::size_t parse_size(const Metadata& meta, const std::string& key, std::size_t fallback) {
  auto it = meta.find(key);
  if (it == meta.end()) return fallback;
  std::size_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorCode::kMalformedFile, "checkpoint metadata " + key + "=" + s + " is not an integer");
  }
  return v;
}

std::string encode_metadata(const Metadata& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      fail(ErrorCode::kInvalidArgument, "checkpoint metadata key/value contains '=' or newline: " + k);
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

Metadata decode_metadata(const std::string& text) {
  Metadata meta;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kMalformedFile, "checkpoint metadata line lacks '='");
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

struct Header {
  Metadata meta;
  std::vector<std::string> names;
};

Header read_header(std::istream& in) {
  const std::string magic = binio::get_bytes(in, 4);
  if (magic != std::string(kMagic, 4)) fail(ErrorCode::kMalformedFile, "not an EMSK checkpoint");
  const auto version = binio::get_u16(in);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kMalformedFile, "unsupported checkpoint version " + std::to_string(version));
  }
  Header h;
  const auto meta_len = binio::get_u32(in);
  if (meta_len > kMaxMetadataBytes) fail(ErrorCode::kMalformedFile, "checkpoint metadata too large");
  h.meta = decode_metadata(binio::get_bytes(in, meta_len));
  const auto count = binio::get_u32(in);
  h.names.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) h.names.push_back(binio::get_bytes(in, binio::get_u16(in)));
  return h;
}

std::vector<std::string> tensor_names(EmotionModel& model) {
  std::vector<std::string> names;
  for (const auto& p : model.parameters().items()) names.push_back(p.name);
  for (const auto& s : model.states()) names.push_back(s.name);
  return names;
}

}  // namespace

Metadata config_to_metadata(const ModelConfig& cfg) {
  return {
      {"head", std::string(head_name(cfg.head))},
      {"conv_layers", std::to_string(cfg.backbone.conv_layers)},
      {"filters", std::to_string(cfg.backbone.filters)},
      {"kernel", std::to_string(cfg.backbone.kernel)},
      {"embed_dim", std::to_string(cfg.backbone.embed_dim)},
      {"recurrent_hidden", std::to_string(cfg.heads.recurrent_hidden)},
      {"transformer_d_model", std::to_string(cfg.heads.transformer_d_model)},
      {"transformer_ffn_hidden", std::to_string(cfg.heads.transformer_ffn_hidden)},
      {"transformer_heads", std::to_string(cfg.heads.transformer_heads)},
      {"transformer_layers", std::to_string(cfg.heads.transformer_layers)},
      {"post_fusion", std::to_string(cfg.classifier.post_fusion)},
      {"fc1", std::to_string(cfg.classifier.fc1)},
      {"fc2", std::to_string(cfg.classifier.fc2)},
      {"num_classes", std::to_string(cfg.classifier.num_classes)},
  };
}

ModelConfig config_from_metadata(const Metadata& meta) {
  ModelConfig cfg;
  auto it = meta.find("head");
  if (it == meta.end()) fail(ErrorCode::kMalformedFile, "checkpoint metadata lacks a head");
  const auto head = parse_head(it->second);
  if (!head) fail(ErrorCode::kMalformedFile, "checkpoint names unknown head '" + it->second + "'");
  cfg.head = *head;
  auto& b = cfg.backbone;
  b.conv_layers = parse_size(meta, "conv_layers", b.conv_layers);
  b.filters = parse_size(meta, "filters", b.filters);
  b.kernel = parse_size(meta, "kernel", b.kernel);
  b.embed_dim = parse_size(meta, "embed_dim", b.embed_dim);
  auto& h = cfg.heads;
  h.recurrent_hidden = parse_size(meta, "recurrent_hidden", h.recurrent_hidden);
  h.transformer_d_model = parse_size(meta, "transformer_d_model", h.transformer_d_model);
  h.transformer_ffn_hidden = parse_size(meta, "transformer_ffn_hidden", h.transformer_ffn_hidden);
  h.transformer_heads = parse_size(meta, "transformer_heads", h.transformer_heads);
  h.transformer_layers = parse_size(meta, "transformer_layers", h.transformer_layers);
  auto& c = cfg.classifier;
  c.post_fusion = parse_size(meta, "post_fusion", c.post_fusion);
  c.fc1 = parse_size(meta, "fc1", c.fc1);
  c.fc2 = parse_size(meta, "fc2", c.fc2);
  c.num_classes = parse_size(meta, "num_classes", c.num_classes);
  return cfg;
}

void write_checkpoint(std::ostream& out, EmotionModel& model, const Metadata& extra) {
  if (!model.built()) fail(ErrorCode::kModelNotBuilt, "cannot checkpoint an unbuilt model");
  Metadata meta = extra;
  for (auto& [k, v] : config_to_metadata(model.config())) meta[k] = v;
  meta["seed"] = std::to_string(model.seed());

  const auto names = tensor_names(model);
  const std::string meta_text = encode_metadata(meta);
  binio::put_bytes(out, std::string(kMagic, 4));
  binio::put_u16(out, kCheckpointVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  binio::put_bytes(out, meta_text);
  binio::put_u32(out, static_cast<std::uint32_t>(names.size()));
  for (const auto& n : names) {
    binio::put_u16(out, static_cast<std::uint16_t>(n.size()));
    binio::put_bytes(out, n);
  }
  const ModelState state = model.snapshot();
  for (const auto& t : state.parameters) write_emsq(out, t);
  for (const auto& t : state.states) write_emsq(out, t);
  if (!out) fail(ErrorCode::kIo, "failed to write checkpoint");
}

EmotionModel read_checkpoint(std::istream& in, Metadata* meta_out) {
  const Header header = read_header(in);
  const ModelConfig cfg = config_from_metadata(header.meta);
  const std::uint64_t seed = parse_size(header.meta, "seed", 0);
  EmotionModel model(cfg, seed);
  const auto expected = tensor_names(model);
  if (expected != header.names) {
    fail(ErrorCode::kMalformedFile, "checkpoint tensor table does not match its architecture");
  }
  ModelState state = model.snapshot();
  for (auto& t : state.parameters) t = read_emsq(in);
  for (auto& t : state.states) t = read_emsq(in);
  try {
    model.restore(state);
  } catch (const Error& e) {
    fail(ErrorCode::kMalformedFile, std::string("checkpoint tensor shapes: ") + e.what());
  }
  if (meta_out) *meta_out = header.meta;
  return model;
}

void save_checkpoint(const std::filesystem::path& path, EmotionModel& model, const Metadata& extra) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_checkpoint(out, model, extra);
}

EmotionModel load_checkpoint(const std::filesystem::path& path, Metadata* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  return read_checkpoint(in, meta_out);
}

Metadata read_checkpoint_metadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  return read_header(in).meta;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p.replace_extension(".manifest.txt");
  return p;
}

void write_model_manifest(const std::filesystem::path& checkpoint, const EmotionModel& model) {
  const auto path = manifest_path_for(checkpoint);
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << model.describe();
}

}  // namespace emoseq::model
