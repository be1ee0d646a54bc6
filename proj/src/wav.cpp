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

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "emoseq/audio_features.hpp"
#include "emoseq/error.hpp"

namespace emoseq::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t u16_at(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

std::uint32_t u32_at(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t off, const char* tag) {
  return std::memcmp(b.data() + off, tag, 4) == 0;
}

struct Format {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

}  // namespace

AudioClip parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    fail(ErrorCode::kMalformedWav, "not a RIFF/WAVE container");
  }
  if (static_cast<std::size_t>(u32_at(bytes, 4)) + 8 > bytes.size()) {
    fail(ErrorCode::kMalformedWav, "RIFF size exceeds file length");
  }

  Format fmt;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::size_t size = u32_at(bytes, off + 4);
    const std::size_t body = off + 8;
    if (body + size > bytes.size()) {
      fail(ErrorCode::kMalformedWav, "chunk size exceeds file length");
    }
    if (tag_is(bytes, off, "fmt ")) {
      if (size < 16) fail(ErrorCode::kMalformedWav, "fmt chunk too short");
      fmt.tag = u16_at(bytes, body);
      fmt.channels = u16_at(bytes, body + 2);
      fmt.rate = u32_at(bytes, body + 4);
      fmt.block_align = u16_at(bytes, body + 12);
      fmt.bits = u16_at(bytes, body + 14);
      if (fmt.tag == kFormatExtensible) {
        if (size < 40) fail(ErrorCode::kMalformedWav, "extensible fmt chunk too short");
        fmt.tag = u16_at(bytes, body + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (tag_is(bytes, off, "data")) {
      data = bytes.subspan(body, size);
      have_data = true;
    }
    off = body + size + (size & 1);
  }
  if (!have_fmt || !have_data) fail(ErrorCode::kMalformedWav, "missing fmt or data chunk");

  const bool pcm16 = fmt.tag == kFormatPcm && fmt.bits == 16;
  const bool float32 = fmt.tag == kFormatFloat && fmt.bits == 32;
  const bool float64 = fmt.tag == kFormatFloat && fmt.bits == 64;
  if (!pcm16 && !float32 && !float64) {
    fail(ErrorCode::kUnsupportedEncoding, "unsupported WAV encoding (format tag " +
                                              std::to_string(fmt.tag) + ", " +
                                              std::to_string(fmt.bits) + " bits)");
  }
  if (fmt.channels != 1 && fmt.channels != 2) {
    fail(ErrorCode::kUnsupportedEncoding,
         "unsupported channel count " + std::to_string(fmt.channels));
  }
  if (fmt.rate == 0) fail(ErrorCode::kMalformedWav, "zero sample rate");
  const std::size_t sample_bytes = fmt.bits / 8;
  if (fmt.block_align != sample_bytes * fmt.channels) {
    fail(ErrorCode::kMalformedWav, "block alignment does not match sample layout");
  }

  const std::size_t frames = data.size() / fmt.block_align;
  if (frames == 0) fail(ErrorCode::kEmptyAudio, "WAV file contains no samples");

  auto decode = [&](std::size_t pos) -> double {
    if (pcm16) {
      return static_cast<double>(static_cast<std::int16_t>(u16_at(data, pos))) / 32768.0;
    }
    if (float32) {
      float f;
      std::memcpy(&f, data.data() + pos, 4);
      return static_cast<double>(f);
    }
    double d;
    std::memcpy(&d, data.data() + pos, 8);
    return d;
  };

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(fmt.rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t pos = i * fmt.block_align;
    if (fmt.channels == 1) {
      clip.samples[i] = decode(pos);
    } else {
      clip.samples[i] = 0.5 * (decode(pos) + decode(pos + sample_bytes));
    }
  }
  return clip;
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

void save_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.sample_rate_hz <= 0) fail(ErrorCode::kInvalidArgument, "sample rate must be positive");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  auto put16 = [&](std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    out.write(b, 2);
  };
  auto put32 = [&](std::uint32_t v) {
    put16(static_cast<std::uint16_t>(v & 0xffff));
    put16(static_cast<std::uint16_t>(v >> 16));
  };
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  put32(36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(16);
  put16(kFormatPcm);
  put16(1);
  put32(static_cast<std::uint32_t>(clip.sample_rate_hz));
  put32(static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);
  put16(2);
  put16(16);
  out.write("data", 4);
  put32(data_bytes);
  for (double s : clip.samples) {
    const double scaled = std::round(s * 32768.0);
    const double clamped = std::fmin(32767.0, std::fmax(-32768.0, scaled));
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(clamped)));
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace emoseq::audio
