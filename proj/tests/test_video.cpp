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

#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "emoseq/video_features.hpp"
#include "support/common.hpp"

using namespace emoseq;
using namespace emoseq::video;

namespace {

// Frame i is filled with the byte value i (mod 256).
FrameSequence ramp(std::size_t t, std::size_t side = kFrameSide, std::size_t c = 1) {
  FrameSequence s{t, side, side, c, {}};
  s.pixels.resize(t * s.frame_bytes());
  for (std::size_t i = 0; i < t; ++i) {
    std::fill_n(s.pixels.begin() + static_cast<std::ptrdiff_t>(i * s.frame_bytes()), s.frame_bytes(),
                static_cast<std::uint8_t>(i));
  }
  return s;
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST_CASE("timestep normalisation") {
  SUBCASE("long clips are subsampled with both endpoints kept") {
    const auto out = normalize_timesteps(ramp(99));
    REQUIRE(out.t == 50);
    CHECK(out.pixels.front() == 0);
    CHECK(out.pixels[49 * out.frame_bytes()] == 98);
    // round(i * 98 / 49) = 2i
    for (std::size_t i = 0; i < 50; ++i) CHECK(out.pixels[i * out.frame_bytes()] == 2 * i);
  }
  SUBCASE("rounding of fractional source positions") {
    const auto out = normalize_timesteps(ramp(60));
    for (std::size_t i = 0; i < 50; ++i) {
      const double exact = static_cast<double>(i) * 59.0 / 49.0;
      CHECK(out.pixels[i * out.frame_bytes()] == static_cast<int>(std::floor(exact + 0.5)));
    }
  }
  SUBCASE("exactly 50 frames pass through") {
    const auto in = ramp(50);
    CHECK(normalize_timesteps(in).pixels == in.pixels);
  }
  SUBCASE("short clips repeat the last frame") {
    const auto out = normalize_timesteps(ramp(7));
    for (std::size_t i = 0; i < 50; ++i) CHECK(out.pixels[i * out.frame_bytes()] == std::min<std::size_t>(i, 6));
  }
  SUBCASE("errors") {
    CHECK_ERROR_CODE(normalize_timesteps(FrameSequence{}), ErrorCode::kNoFrames);
    CHECK_ERROR_CODE(normalize_timesteps(ramp(3, 32)), ErrorCode::kWrongFrameSize);
  }
}

TEST_CASE("grayscale conversion uses BT.601 luma") {
  FrameSequence rgb{1, 1, 3, 3, {255, 0, 0, 0, 255, 0, 10, 20, 30}};
  const auto g = to_grayscale(rgb);
  CHECK(g.c == 1);
  CHECK(g.pixels == std::vector<std::uint8_t>{76, 150, 18});
}

TEST_CASE("feature tensor scaling") {
  auto seq = ramp(50);
  seq.pixels[5] = 255;
  const auto f = to_feature_tensor(seq);
  CHECK(f.values.shape() == Shape{50, 64, 64, 1});
  CHECK(f.values[5] == 1.0);
  CHECK(f.values[3 * 4096] == doctest::Approx(3.0 / 255.0));
  CHECK_ERROR_CODE(to_feature_tensor(ramp(49)), ErrorCode::kShapeMismatch);
}

TEST_CASE("frame directories") {
  testing::TempDir dir("frames");
  const auto seq = ramp(3);
  // Written out of order; loading sorts by name.
  for (std::size_t i : {2u, 0u, 1u}) {
    save_pgm(dir / ("f" + std::to_string(i) + ".pgm"), 64, 64, seq.pixels.data() + i * 4096);
  }
  write_file(dir / "notes.txt", "ignored");
  const auto loaded = load_frames(dir.path());
  CHECK(loaded.t == 3);
  CHECK(loaded.pixels == seq.pixels);
  CHECK(video_features(dir.path()).values.shape() == Shape{50, 64, 64, 1});

  SUBCASE("colour frames with comments and a non-255 maxval") {
    testing::TempDir d2("ppm");
    std::string body = "P6\n# comment\n2 1\n15\n";
    body += std::string{15, 0, 0, 0, 15, 0};
    write_file(d2 / "a.ppm", body);
    const auto s = load_frames(d2.path());
    CHECK(s.c == 1);
    CHECK(s.pixels == std::vector<std::uint8_t>{76, 150});
  }
  SUBCASE("inconsistent geometry") {
    std::vector<std::uint8_t> small(32 * 32, 0);
    save_pgm(dir / "f9.pgm", 32, 32, small.data());
    CHECK_ERROR_CODE(load_frames(dir.path()), ErrorCode::kInconsistentDimensions);
  }
  SUBCASE("malformed images") {
    write_file(dir / "f5.pgm", "P2\n1 1\n255\n0");
    CHECK_ERROR_CODE(load_frames(dir.path()), ErrorCode::kMalformedImage);
  }
  SUBCASE("truncated raster") {
    write_file(dir / "f5.pgm", "P5\n64 64\n255\nabc");
    CHECK_ERROR_CODE(load_frames(dir.path()), ErrorCode::kMalformedImage);
  }
  SUBCASE("empty directory") {
    testing::TempDir empty("empty");
    CHECK_ERROR_CODE(load_frames(empty.path()), ErrorCode::kNoFrames);
  }
  CHECK_ERROR_CODE(load_frames(dir / "missing"), ErrorCode::kIo);
}

TEST_CASE("EMSF container") {
  testing::TempDir dir("emsf");
  const auto seq = ramp(4, 64, 3);
  save_emsf(dir / "clip.emsf", seq);
  const auto back = load_frames(dir / "clip.emsf");
  CHECK(back.t == 4);
  CHECK(back.c == 1);
  CHECK(back.pixels == to_grayscale(seq).pixels);

  std::ifstream in(dir / "clip.emsf", std::ios::binary);
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  write_file(dir / "short.emsf", bytes.substr(0, bytes.size() - 1));
  CHECK_ERROR_CODE(load_frames(dir / "short.emsf"), ErrorCode::kMalformedImage);
  write_file(dir / "bad.emsf", "EMSX" + bytes.substr(4));
  CHECK_ERROR_CODE(load_frames(dir / "bad.emsf"), ErrorCode::kMalformedImage);
  FrameSequence wrong = seq;
  wrong.pixels.pop_back();
  CHECK_ERROR_CODE(save_emsf(dir / "x.emsf", wrong), ErrorCode::kInvalidArgument);
}
