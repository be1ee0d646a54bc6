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
#include <string>

#include "emoseq/model_zoo.hpp"

namespace emoseq::model {

// Checkpoint container:
//   "EMSK" | u16 version | u32 meta_len | meta (key=value lines)
//   | u32 count | count x (u16 name_len | name) | count x EMSQ record
// Records follow the name table order: trainable parameters, then
// batchnorm running statistics.
inline constexpr std::uint16_t kCheckpointVersion = 1;

using Metadata = std::map<std::string, std::string>;

Metadata config_to_metadata(const ModelConfig& cfg);
// Unknown keys are ignored so that callers can stash extra metadata.
ModelConfig config_from_metadata(const Metadata& meta);

void write_checkpoint(std::ostream& out, EmotionModel& model, const Metadata& extra = {});
EmotionModel read_checkpoint(std::istream& in, Metadata* meta_out = nullptr);

void save_checkpoint(const std::filesystem::path& path, EmotionModel& model,
                     const Metadata& extra = {});
EmotionModel load_checkpoint(const std::filesystem::path& path, Metadata* meta_out = nullptr);

// Header only; cheap way to learn which head a checkpoint holds.
Metadata read_checkpoint_metadata(const std::filesystem::path& path);

// Writes describe() next to a checkpoint: <stem>.manifest.txt.
std::filesystem::path manifest_path_for(const std::filesystem::path& checkpoint);
void write_model_manifest(const std::filesystem::path& checkpoint, const EmotionModel& model);

}  // namespace emoseq::model
