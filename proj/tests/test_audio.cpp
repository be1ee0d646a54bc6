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

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <vector>

#include "emoseq/audio_features.hpp"
#include "emoseq/rng.hpp"
#include "support/common.hpp"
#include "support/oracles.hpp"

using namespace emoseq;
using namespace emoseq::audio;

namespace {

void put16(std::vector<std::uint8_t>& b, unsigned v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void put_tag(std::vector<std::uint8_t>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

struct WavSpec {
  unsigned tag = 1;
  unsigned channels = 1;
  std::uint32_t rate = 22050;
  unsigned bits = 16;
  int block_align = -1;  // derived when negative
  bool extra_chunk = false;
};

std::vector<std::uint8_t> make_wav(const WavSpec& s, const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> b;
  put_tag(b, "RIFF");
  put32(b, 0);  // patched below
  put_tag(b, "WAVE");
  if (s.extra_chunk) {
    put_tag(b, "LIST");
    put32(b, 3);
    b.insert(b.end(), {'a', 'b', 'c', 0});  // odd chunk plus pad byte
  }
  put_tag(b, "fmt ");
  put32(b, 16);
  put16(b, s.tag);
  put16(b, s.channels);
  put32(b, s.rate);
  const unsigned align = s.block_align >= 0 ? static_cast<unsigned>(s.block_align) : s.channels * s.bits / 8;
  put32(b, s.rate * align);
  put16(b, align);
  put16(b, s.bits);
  put_tag(b, "data");
  put32(b, static_cast<std::uint32_t>(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  const auto riff = static_cast<std::uint32_t>(b.size() - 8);
  std::memcpy(b.data() + 4, &riff, 4);
  return b;
}

std::vector<std::uint8_t> pcm16(const std::vector<int>& v) {
  std::vector<std::uint8_t> out;
  for (int s : v) put16(out, static_cast<unsigned>(static_cast<std::uint16_t>(static_cast<std::int16_t>(s))));
  return out;
}

template <class T>
std::vector<std::uint8_t> raw(const std::vector<T>& v) {
  std::vector<std::uint8_t> out(v.size() * sizeof(T));
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

std::vector<double> tone(double freq, double sr, std::size_t n, double amp = 0.5) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / sr);
  return x;
}

}  // namespace

TEST_CASE("wav decoding") {
  SUBCASE("pcm16 mono scales by 1/32768") {
    const auto clip = parse_wav(make_wav({}, pcm16({0, 16384, -32768, 32767})));
    CHECK(clip.sample_rate_hz == 22050);
    REQUIRE(clip.samples.size() == 4);
    CHECK(clip.samples[1] == 0.5);
    CHECK(clip.samples[2] == -1.0);
    CHECK(clip.samples[3] == doctest::Approx(32767.0 / 32768.0));
  }
  SUBCASE("stereo is averaged") {
    WavSpec s;
    s.channels = 2;
    const auto clip = parse_wav(make_wav(s, pcm16({16384, 0, -16384, -16384})));
    REQUIRE(clip.samples.size() == 2);
    CHECK(clip.samples[0] == 0.25);
    CHECK(clip.samples[1] == -0.5);
  }
  SUBCASE("float32 and float64") {
    WavSpec s;
    s.tag = 3;
    s.bits = 32;
    CHECK(parse_wav(make_wav(s, raw<float>({0.25f, -0.75f}))).samples == std::vector<double>{0.25, -0.75});
    s.bits = 64;
    CHECK(parse_wav(make_wav(s, raw<double>({0.1, 2.0}))).samples == std::vector<double>{0.1, 2.0});
  }
  SUBCASE("unknown chunks are skipped") {
    WavSpec s;
    s.extra_chunk = true;
    CHECK(parse_wav(make_wav(s, pcm16({100}))).samples.size() == 1);
  }
  SUBCASE("malformed containers") {
    std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0, 'W', 'A', 'V', 'E'};
    CHECK_ERROR_CODE(parse_wav(junk), ErrorCode::kMalformedWav);
    auto truncated = make_wav({}, pcm16({1, 2, 3, 4}));
    truncated.resize(truncated.size() - 4);
    CHECK_ERROR_CODE(parse_wav(truncated), ErrorCode::kMalformedWav);
    WavSpec bad_align;
    bad_align.block_align = 3;
    CHECK_ERROR_CODE(parse_wav(make_wav(bad_align, pcm16({1, 2, 3}))), ErrorCode::kMalformedWav);
    CHECK_ERROR_CODE(parse_wav(std::vector<std::uint8_t>{}), ErrorCode::kMalformedWav);
  }
  SUBCASE("unsupported encodings") {
    WavSpec u8;
    u8.bits = 8;
    CHECK_ERROR_CODE(parse_wav(make_wav(u8, {1, 2})), ErrorCode::kUnsupportedEncoding);
    WavSpec three;
    three.channels = 3;
    CHECK_ERROR_CODE(parse_wav(make_wav(three, pcm16({1, 2, 3}))), ErrorCode::kUnsupportedEncoding);
    WavSpec alaw;
    alaw.tag = 6;
    alaw.bits = 8;
    CHECK_ERROR_CODE(parse_wav(make_wav(alaw, {1})), ErrorCode::kUnsupportedEncoding);
  }
  SUBCASE("empty data chunk") {
    CHECK_ERROR_CODE(parse_wav(make_wav({}, {})), ErrorCode::kEmptyAudio);
  }
  SUBCASE("file round trip through the pcm16 writer") {
    testing::TempDir dir("wav");
    AudioClip clip{{0.0, 0.5, -0.5, 2.0}, 16000};
    save_wav_pcm16(dir / "a.wav", clip);
    const auto back = load_wav(dir / "a.wav");
    CHECK(back.sample_rate_hz == 16000);
    CHECK(back.samples[1] == 0.5);
    CHECK(back.samples[3] == doctest::Approx(32767.0 / 32768.0));  // clamped
    CHECK_ERROR_CODE(load_wav(dir / "missing.wav"), ErrorCode::kIo);
  }
}

TEST_CASE("clip preparation") {
  const AudioClip short_clip{{1.0, 2.0, 3.0}, kTargetSampleRate};
  const auto p = prepare_clip(short_clip);
  CHECK(p.samples.size() == kTargetSamples);
  CHECK(p.samples[2] == 3.0);
  CHECK(p.samples[3] == 0.0);

  AudioClip hi{std::vector<double>(8 * 44100), 44100};
  for (std::size_t i = 0; i < hi.samples.size(); ++i) hi.samples[i] = static_cast<double>(i);
  const auto down = prepare_clip(hi);
  CHECK(down.samples.size() == kTargetSamples);
  CHECK(down.sample_rate_hz == kTargetSampleRate);
  // 44 100 -> 22 050 keeps every second sample exactly.
  CHECK(down.samples[1000] == 2000.0);

  AudioClip lo{std::vector<double>(11025), 11025};
  for (std::size_t i = 0; i < lo.samples.size(); ++i) lo.samples[i] = static_cast<double>(i);
  const auto up = prepare_clip(lo);
  CHECK(up.samples[201] == doctest::Approx(100.5));
  CHECK(up.samples[22049] == 11024.0);  // past the end holds the last sample
  CHECK(up.samples[22050] == 0.0);

  CHECK_ERROR_CODE(prepare_clip(AudioClip{{}, 22050}), ErrorCode::kEmptyAudio);
  CHECK_ERROR_CODE(prepare_clip(AudioClip{{1.0}, 0}), ErrorCode::kInvalidArgument);
}

TEST_CASE("mel filterbank invariants") {
  CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5));
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
  const auto fb = make_mel_filterbank(22050, 2048, 128, 0.0, 11025.0);
  CHECK(fb.weights.shape() == Shape{128, 1025});
  const double bin_hz = 22050.0 / 2048.0;
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    double area = 0.0;
    std::size_t nonzero = 0;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double w = fb.weights[m * fb.n_bins + k];
      CHECK(w >= 0.0);
      area += w * bin_hz;
      nonzero += w > 0.0;
    }
    if (m > 0) CHECK(fb.center_hz[m] > fb.center_hz[m - 1]);
    // Wide filters integrate to one; narrow ones are undersampled by the grid.
    if (nonzero >= 8) CHECK(area == doctest::Approx(1.0).epsilon(0.05));
  }
  CHECK_ERROR_CODE(make_mel_filterbank(22050, 2048, 0, 0.0, 11025.0), ErrorCode::kInvalidArgument);
  CHECK_ERROR_CODE(make_mel_filterbank(22050, 2048, 4, 500.0, 100.0), ErrorCode::kInvalidArgument);
}

TEST_CASE("framing helpers") {
  const auto w = hann_window(8);
  CHECK(w[0] == 0.0);
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(w[6]));
  const std::vector<double> x = {1, 2, 3, 4, 5};
  CHECK(reflect_pad(x, 2) == std::vector<double>{3, 2, 1, 2, 3, 4, 5, 4, 3});
  CHECK_ERROR_CODE(reflect_pad(x, 5), ErrorCode::kTooFewFrames);
  CHECK(frame_count(kTargetSamples, 512) == 216);
}

TEST_CASE("power spectrogram matches a naive DFT and satisfies Parseval") {
  Rng rng(5);
  MfccExtractor ex;
  std::vector<double> x(4096);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  const Tensor p = ex.power_spectrogram(x);
  const auto ref = oracle::naive_power_spectrogram(x, 2048, 512);
  REQUIRE(p.dim(0) == ref.size());
  double num = 0.0, den = 0.0;
  for (std::size_t f = 0; f < ref.size(); ++f) {
    for (std::size_t k = 0; k < ref[f].size(); ++k) {
      const double d = p[f * 1025 + k] - ref[f][k];
      num += d * d;
      den += ref[f][k] * ref[f][k];
    }
  }
  CHECK(std::sqrt(num / den) < 1e-9);

  // Parseval on frame 3 (fully inside the signal): sum |X|^2 = N sum |xw|^2.
  const auto win = hann_window(2048);
  double time_energy = 0.0;
  for (std::size_t t = 0; t < 2048; ++t) {
    const double v = x[3 * 512 - 1024 + t] * win[t];
    time_energy += v * v;
  }
  double freq_energy = p[3 * 1025] + p[3 * 1025 + 1024];
  for (std::size_t k = 1; k < 1024; ++k) freq_energy += 2.0 * p[3 * 1025 + k];
  CHECK(freq_energy == doctest::Approx(2048.0 * time_energy).epsilon(1e-10));
}

TEST_CASE("a pure tone peaks at its frequency bin") {
  MfccExtractor ex;
  const double f0 = 50.0 * 22050.0 / 2048.0;  // exactly bin 50
  const Tensor p = ex.power_spectrogram(tone(f0, 22050.0, 22050));
  std::size_t best = 0;
  for (std::size_t k = 0; k < 1025; ++k) {
    if (p[10 * 1025 + k] > p[10 * 1025 + best]) best = k;
  }
  CHECK(best == 50);
}

TEST_CASE("MFCC chain matches the naive reference") {
  Rng rng(11);
  auto x = tone(440.0, 22050.0, 5512, 0.3);
  for (auto& v : x) v += 0.05 * rng.normal();
  const auto m = extract_mfcc(AudioClip{x, 22050});
  const auto ref = oracle::naive_mfcc(x, 22050.0, 2048, 512, 128, 40);
  REQUIRE(m.values.shape() == Shape{ref.size(), 40});
  double num = 0.0, den = 0.0;
  for (std::size_t f = 0; f < ref.size(); ++f) {
    for (std::size_t k = 0; k < 40; ++k) {
      const double d = m.values[f * 40 + k] - ref[f][k];
      num += d * d;
      den += ref[f][k] * ref[f][k];
    }
  }
  CHECK(std::sqrt(num / den) < 1e-8);
}

TEST_CASE("silence gives a flat log-mel spectrum") {
  const auto m = extract_mfcc(AudioClip{std::vector<double>(22050, 0.0), 22050});
  for (std::size_t f = 0; f < m.values.dim(0); ++f) {
    CHECK(m.values[f * 40] == doctest::Approx(-100.0 * std::sqrt(128.0)));
    for (std::size_t k = 1; k < 40; ++k) CHECK(m.values[f * 40 + k] == 0.0);
  }
}

TEST_CASE("log-mel floor is top_db below the clip peak") {
  MfccExtractor ex;
  auto x = tone(1000.0, 22050.0, 11025, 0.9);
  for (std::size_t i = 5000; i < x.size(); ++i) x[i] = 0.0;
  const Tensor lm = ex.log_mel(ex.power_spectrogram(x));
  double lo = 1e300, hi = -1e300;
  for (double v : lm.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo == doctest::Approx(80.0));
}

TEST_CASE("feature shapes and errors") {
  const auto f = audio_features(AudioClip{tone(300.0, 16000.0, 16000 * 7), 16000});
  CHECK(f.windows.shape() == Shape{9, 40, 40});
  const auto m = extract_mfcc(prepare_clip(AudioClip{tone(300.0, 22050.0, 100), 22050}));
  CHECK(m.values.shape() == Shape{216, 40});
  // Window k is rows 20k .. 20k + 39 of the MFCC matrix.
  const auto w = window_chunks(m);
  CHECK(w.windows[(3 * 40 + 5) * 40 + 7] == m.values[(60 + 5) * 40 + 7]);

  std::vector<double> bad(4000, 0.0);
  bad[17] = std::nan("");
  CHECK_ERROR_CODE(extract_mfcc(AudioClip{bad, 22050}), ErrorCode::kNonFiniteInput);
  CHECK_ERROR_CODE(window_chunks(MfccMatrix{Tensor({39, 40})}), ErrorCode::kTooFewFrames);
  CHECK_ERROR_CODE(extract_mfcc(AudioClip{std::vector<double>(100, 0.1), 22050}), ErrorCode::kTooFewFrames);
}
