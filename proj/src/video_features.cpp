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

#include "emoseq/video_features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "emoseq/emsq_io.hpp"
#include "emoseq/error.hpp"

namespace emoseq::video {

namespace {

namespace fs = std::filesystem;

struct Image {
  std::size_t w = 0, h = 0, c = 0;
  std::vector<std::uint8_t> pixels;
};

std::vector<std::uint8_t> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Netpbm header token, skipping whitespace and '#' comments.
std::size_t read_header_number(const std::vector<std::uint8_t>& b, std::size_t& pos,
                               const fs::path& path) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) {
    fail(ErrorCode::kMalformedImage, "bad netpbm header in " + path.string());
  }
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + static_cast<std::size_t>(b[pos] - '0');
    if (v > 1'000'000) fail(ErrorCode::kMalformedImage, "netpbm dimension too large in " + path.string());
    ++pos;
  }
  return v;
}

Image read_netpbm(const fs::path& path) {
  const auto b = read_all(path);
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) {
    fail(ErrorCode::kMalformedImage, path.string() + " is not a binary PGM/PPM image");
  }
  Image img;
  img.c = b[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  img.w = read_header_number(b, pos, path);
  img.h = read_header_number(b, pos, path);
  const std::size_t maxval = read_header_number(b, pos, path);
  if (img.w == 0 || img.h == 0 || maxval == 0 || maxval > 255) {
    fail(ErrorCode::kMalformedImage, "unsupported netpbm geometry or depth in " + path.string());
  }
  if (pos >= b.size() || !std::isspace(b[pos])) {
    fail(ErrorCode::kMalformedImage, "bad netpbm header terminator in " + path.string());
  }
  ++pos;
  const std::size_t n = img.w * img.h * img.c;
  if (b.size() - pos < n) fail(ErrorCode::kMalformedImage, "truncated raster in " + path.string());
  img.pixels.assign(b.begin() + static_cast<std::ptrdiff_t>(pos),
                    b.begin() + static_cast<std::ptrdiff_t>(pos + n));
  if (maxval != 255) {
    for (auto& p : img.pixels) {
      p = static_cast<std::uint8_t>(std::lround(255.0 * p / static_cast<double>(maxval)));
    }
  }
  return img;
}

FrameSequence load_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".PGM" || ext == ".PPM") files.push_back(entry.path());
  }
  if (files.empty()) fail(ErrorCode::kNoFrames, "no PGM/PPM frames in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  FrameSequence seq;
  for (const auto& f : files) {
    Image img = read_netpbm(f);
    if (seq.t == 0) {
      seq.w = img.w;
      seq.h = img.h;
      seq.c = img.c;
    } else if (img.w != seq.w || img.h != seq.h || img.c != seq.c) {
      fail(ErrorCode::kInconsistentDimensions,
           f.filename().string() + " is " + std::to_string(img.w) + "x" + std::to_string(img.h) +
               ", expected " + std::to_string(seq.w) + "x" + std::to_string(seq.h));
    }
    seq.pixels.insert(seq.pixels.end(), img.pixels.begin(), img.pixels.end());
    ++seq.t;
  }
  return seq;
}

FrameSequence load_emsf(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    if (binio::get_bytes(in, 4) != "EMSF") {
      fail(ErrorCode::kMalformedImage, path.string() + " is not an EMSF file");
    }
    if (binio::get_u16(in) != 1) fail(ErrorCode::kMalformedImage, "unsupported EMSF version");
    FrameSequence seq;
    seq.t = binio::get_u32(in);
    seq.h = binio::get_u16(in);
    seq.w = binio::get_u16(in);
    seq.c = binio::get_u8(in);
    if (seq.t == 0) fail(ErrorCode::kNoFrames, path.string() + " holds zero frames");
    if (seq.h == 0 || seq.w == 0 || (seq.c != 1 && seq.c != 3)) {
      fail(ErrorCode::kMalformedImage, "invalid EMSF geometry in " + path.string());
    }
    const std::string raw = binio::get_bytes(in, seq.t * seq.frame_bytes());
    seq.pixels.assign(raw.begin(), raw.end());
    return seq;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedFile) {
      fail(ErrorCode::kMalformedImage, "truncated EMSF file " + path.string());
    }
    throw;
  }
}

}  // namespace

FrameSequence to_grayscale(const FrameSequence& seq) {
  if (seq.c == 1) return seq;
  if (seq.c != 3) fail(ErrorCode::kMalformedImage, "frames must have 1 or 3 channels");
  FrameSequence out{seq.t, seq.h, seq.w, 1, {}};
  out.pixels.resize(seq.t * seq.h * seq.w);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double luma = 0.299 * seq.pixels[3 * i] + 0.587 * seq.pixels[3 * i + 1] +
                        0.114 * seq.pixels[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>(std::min(255L, std::lround(luma)));
  }
  return out;
}

FrameSequence load_frames(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::kIo, path.string() + " does not exist");
  FrameSequence seq = fs::is_directory(path) ? load_directory(path) : load_emsf(path);
  return to_grayscale(seq);
}

void save_emsf(const fs::path& path, const FrameSequence& seq) {
  if (seq.pixels.size() != seq.t * seq.frame_bytes()) {
    fail(ErrorCode::kInvalidArgument, "frame buffer size does not match geometry");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  binio::put_bytes(out, "EMSF");
  binio::put_u16(out, 1);
  binio::put_u32(out, static_cast<std::uint32_t>(seq.t));
  binio::put_u16(out, static_cast<std::uint16_t>(seq.h));
  binio::put_u16(out, static_cast<std::uint16_t>(seq.w));
  binio::put_u8(out, static_cast<std::uint8_t>(seq.c));
  out.write(reinterpret_cast<const char*>(seq.pixels.data()),
            static_cast<std::streamsize>(seq.pixels.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void save_pgm(const fs::path& path, std::size_t w, std::size_t h, const std::uint8_t* pixels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels), static_cast<std::streamsize>(w * h));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

FrameSequence normalize_timesteps(const FrameSequence& seq, std::size_t target) {
  if (seq.t == 0) fail(ErrorCode::kNoFrames, "frame sequence is empty");
  if (seq.h != kFrameSide || seq.w != kFrameSide) {
    fail(ErrorCode::kWrongFrameSize, "frames are " + std::to_string(seq.w) + "x" +
                                         std::to_string(seq.h) + ", expected 64x64");
  }
  if (target == 0) fail(ErrorCode::kInvalidArgument, "target timestep count must be positive");
  FrameSequence out{target, seq.h, seq.w, seq.c, {}};
  const std::size_t fb = seq.frame_bytes();
  out.pixels.resize(target * fb);
  for (std::size_t i = 0; i < target; ++i) {
    std::size_t src;
    if (seq.t >= target) {
      // round(i * (T - 1) / (target - 1)), halves rounded up.
      src = target == 1 ? 0 : (2 * i * (seq.t - 1) + (target - 1)) / (2 * (target - 1));
    } else {
      src = std::min(i, seq.t - 1);
    }
    std::copy_n(seq.pixels.begin() + static_cast<std::ptrdiff_t>(src * fb), fb,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(i * fb));
  }
  return out;
}

VideoFeatureTensor to_feature_tensor(const FrameSequence& seq) {
  if (seq.t != kTargetTimesteps || seq.h != kFrameSide || seq.w != kFrameSide || seq.c != 1) {
    fail(ErrorCode::kShapeMismatch, "frame sequence is not 50x64x64x1");
  }
  Tensor values({seq.t, seq.h, seq.w, 1});
  for (std::size_t i = 0; i < seq.pixels.size(); ++i) values[i] = seq.pixels[i] / 255.0;
  return VideoFeatureTensor{std::move(values)};
}

VideoFeatureTensor video_features(const fs::path& path) {
  return to_feature_tensor(normalize_timesteps(load_frames(path)));
}

}  // namespace emoseq::video
