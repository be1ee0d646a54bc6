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

// Downsized architectures and inputs for fast model-level tests.

#pragma once

#include "emoseq/model_zoo.hpp"
#include "support/gradcheck.hpp"

namespace emoseq::testing {

inline model::ModelConfig small_config(model::HeadKind head) {
  model::ModelConfig c;
  c.head = head;
  c.backbone = {2, 4, 3, 8};
  c.heads = {8, 8, 8, 2, 1};
  c.classifier = {8, 8, 8, 6};
  return c;
}

// Audio T=3 and video T=2 clips of 8x8 frames.
struct SmallClip {
  Tensor audio;
  Tensor video;
};

inline SmallClip small_clip(Rng& rng, std::size_t audio_t = 3, std::size_t video_t = 2) {
  return {random_tensor({audio_t, 8, 8}, rng), random_tensor({video_t, 8, 8, 1}, rng, 0.0, 1.0)};
}

}  // namespace emoseq::testing
