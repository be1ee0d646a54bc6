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

#include "emoseq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "emoseq/audio_features.hpp"
#include "emoseq/error.hpp"
#include "emoseq/rng.hpp"
#include "emoseq/video_features.hpp"

namespace emoseq::synthetic {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kSampleRates[] = {22050, 16000, 44100};

struct SpeakerStyle {
  double amplitude;
  double phase;
  double brightness;
  double bar_offset;
  int sample_rate;
};

SpeakerStyle speaker_style(std::size_t speaker, Rng& rng) {
  SpeakerStyle s;
  s.amplitude = rng.uniform(0.25, 0.6);
  s.phase = rng.uniform(0.0, 2.0 * kPi);
  s.brightness = rng.uniform(170.0, 235.0);
  s.bar_offset = rng.uniform(0.0, 64.0);
  s.sample_rate = kSampleRates[speaker % 3];
  return s;
}

audio::AudioClip make_audio(int label, const SpeakerStyle& style, Rng& rng) {
  audio::AudioClip clip;
  clip.sample_rate_hz = style.sample_rate;
  const double seconds = rng.uniform(1.6, 3.2);
  const auto n = static_cast<std::size_t>(seconds * style.sample_rate);
  const double freq = 200.0 * (label + 1);
  const double amp = style.amplitude * rng.uniform(0.85, 1.15);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / style.sample_rate;
    clip.samples[i] = amp * std::sin(2.0 * kPi * freq * t + style.phase) + 0.02 * rng.normal();
  }
  return clip;
}

video::FrameSequence make_video(int label, const SpeakerStyle& style, Rng& rng) {
  video::FrameSequence seq;
  seq.t = 36 + rng.below(40);  // both shorter and longer than 50
  seq.h = video::kFrameSide;
  seq.w = video::kFrameSide;
  seq.c = 1;
  seq.pixels.resize(seq.t * seq.h * seq.w);
  const double angle = kPi * label / 6.0;
  const double nx = std::cos(angle), ny = std::sin(angle);
  const double speed = 0.5 + 0.35 * (label % 3);
  const double start = style.bar_offset + rng.uniform(0.0, 8.0);
  const double c = (video::kFrameSide - 1) / 2.0;
  for (std::size_t f = 0; f < seq.t; ++f) {
    const double offset = std::fmod(start + speed * static_cast<double>(f), 64.0) - 32.0;
    std::uint8_t* frame = seq.pixels.data() + f * seq.h * seq.w;
    for (std::size_t y = 0; y < seq.h; ++y) {
      for (std::size_t x = 0; x < seq.w; ++x) {
        const double d = (static_cast<double>(x) - c) * nx + (static_cast<double>(y) - c) * ny;
        const bool on_bar = std::abs(d - offset) < 3.0;
        const double v = (on_bar ? style.brightness : 25.0) + 6.0 * rng.normal();
        frame[y * seq.w + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return seq;
}

}  // namespace

std::vector<training::ManifestEntry> generate_synthetic(const std::filesystem::path& out_dir,
                                                        const SyntheticOptions& options) {
  if (options.n_speakers == 0 || options.clips_per_speaker == 0) {
    fail(ErrorCode::kInvalidArgument, "synthetic dataset needs speakers and clips");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  std::filesystem::create_directories(out_dir / "video", ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  Rng rng(options.seed);
  std::vector<training::ManifestEntry> entries;
  entries.reserve(options.n_speakers * options.clips_per_speaker);
  char id[64];
  for (std::size_t s = 0; s < options.n_speakers; ++s) {
    const SpeakerStyle style = speaker_style(s, rng);
    std::snprintf(id, sizeof id, "spk%03zu", s);
    const std::string speaker = id;
    for (std::size_t j = 0; j < options.clips_per_speaker; ++j) {
      const int label = static_cast<int>(j % training::kNumClasses);
      std::snprintf(id, sizeof id, "%s_clip%03zu", speaker.c_str(), j);
      const std::string clip_id = id;
      training::ManifestEntry e{clip_id, speaker, label,
                                std::filesystem::path("audio") / (clip_id + ".wav"),
                                std::filesystem::path("video") / (clip_id + ".emsf")};
      audio::save_wav_pcm16(out_dir / e.audio_path, make_audio(label, style, rng));
      video::save_emsf(out_dir / e.video_path, make_video(label, style, rng));
      entries.push_back(std::move(e));
    }
  }
  training::save_manifest(out_dir / "manifest.csv", entries);
  for (auto& e : entries) {
    e.audio_path = out_dir / e.audio_path;
    e.video_path = out_dir / e.video_path;
  }
  return entries;
}

}  // namespace emoseq::synthetic
