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

#include "emoseq/tensor.hpp"

namespace emoseq::video {

inline constexpr std::size_t kTargetTimesteps = 50;
inline constexpr std::size_t kFrameSide = 64;

// T x H x W x C bytes, row-major.
struct FrameSequence {
  std::size_t t = 0, h = 0, w = 0, c = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t frame_bytes() const noexcept { return h * w * c; }
};

struct VideoFeatureTensor {
  Tensor values;  // 50 x 64 x 64 x 1, in [0, 1]
};

// Path is either an EMSF file or a directory of binary PGM/PPM images taken
// in lexicographic filename order. Colour input comes back as grayscale.
FrameSequence load_frames(const std::filesystem::path& path);

void save_emsf(const std::filesystem::path& path, const FrameSequence& seq);
void save_pgm(const std::filesystem::path& path, std::size_t w, std::size_t h,
              const std::uint8_t* pixels);

// luma = round(0.299 R + 0.587 G + 0.114 B)
FrameSequence to_grayscale(const FrameSequence& seq);

// Uniform, endpoint-inclusive subsampling when T >= target; otherwise the last
// frame is repeated.
FrameSequence normalize_timesteps(const FrameSequence& seq,
                                  std::size_t target = kTargetTimesteps);

VideoFeatureTensor to_feature_tensor(const FrameSequence& seq);

// load_frames -> normalize_timesteps -> to_feature_tensor.
VideoFeatureTensor video_features(const std::filesystem::path& path);

}  // namespace emoseq::video
