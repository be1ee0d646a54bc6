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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "emoseq/training.hpp"

namespace emoseq::synthetic {

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t n_speakers = 12;
  std::size_t clips_per_speaker = 30;
};

// Writes out_dir/manifest.csv, out_dir/audio/<clip>.wav and
// out_dir/video/<clip>.emsf. Clip j of every speaker has label j mod 6, so
// labels are balanced whenever clips_per_speaker is a multiple of 6.
//
// Class k is a 200 (k + 1) Hz tone in noise and a 64 x 64 bar drifting at a
// class-specific angle and speed. Speakers differ in amplitude, phase,
// brightness, sample rate and clip length.
std::vector<training::ManifestEntry> generate_synthetic(const std::filesystem::path& out_dir,
                                                        const SyntheticOptions& options = {});

}  // namespace emoseq::synthetic
