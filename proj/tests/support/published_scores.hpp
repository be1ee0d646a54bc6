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

// Published per-class scores for the four sequence heads on six emotion
// classes, with the reported harmonic-mean row for each head.

#pragma once

#include <array>
#include <cstdint>

namespace emoseq::testing {

struct Prf {
  double p, r, f1;
};

struct PublishedHead {
  const char* name;
  std::array<Prf, 6> classes;  // angry, happy, neutral, sad, disgust, fear
  Prf harmonic;
};

inline constexpr std::array<std::uint64_t, 6> kPublishedSupport = {140, 140, 120, 140, 140, 140};

inline constexpr std::array<PublishedHead, 4> kPublishedHeads = {{
    {"transformer",
     {{{.727, .743, .735}, {.946, .879, .911}, {.506, .683, .582},
       {.497, .614, .550}, {.717, .779, .747}, {.733, .314, .440}}},
     {.653, .597, .625}},
    {"lstm",
     {{{.720, .807, .761}, {.966, .821, .888}, {.630, .725, .674},
       {.539, .736, .622}, {.655, .800, .720}, {.841, .264, .402}}},
     {.699, .586, .638}},
    {"gru",
     {{{.659, .829, .734}, {.897, .936, .916}, {.634, .650, .642},
       {.545, .564, .554}, {.655, .814, .726}, {.804, .321, .459}}},
     {.680, .604, .640}},
    {"maxpool",
     {{{.677, .807, .736}, {.909, .714, .800}, {.533, .675, .596},
       {.541, .471, .504}, {.593, .686, .636}, {.664, .507, .575}}},
     {.632, .620, .626}},
}};

}  // namespace emoseq::testing
