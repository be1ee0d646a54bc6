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
#include <memory>
#include <span>
#include <vector>

#include "emoseq/tensor.hpp"

namespace emoseq::audio {

inline constexpr int kTargetSampleRate = 22050;
inline constexpr std::size_t kTargetSamples = 110250;  // 5 s at 22 050 Hz

struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 0;
};

// RIFF/WAVE with PCM-16 or IEEE-float (32/64 bit) samples, mono or stereo.
// Stereo is averaged to mono; PCM is scaled by 1/32768.
AudioClip parse_wav(std::span<const std::uint8_t> bytes);
AudioClip load_wav(const std::filesystem::path& path);
// Mono PCM-16 writer; samples are clamped to the representable range.
void save_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip);

// Resamples to 22 050 Hz by linear interpolation (when needed), then
// zero-pads or truncates to exactly 5 s.
AudioClip prepare_clip(const AudioClip& clip);

struct MfccOptions {
  int sample_rate_hz = kTargetSampleRate;
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  std::size_t n_mfcc = 40;
  std::size_t n_mels = 128;
  double fmin_hz = 0.0;
  double fmax_hz = 11025.0;
  double top_db = 80.0;
  double amin = 1e-10;
};

// Triangular filters on the 2595*log10(1 + f/700) mel scale, area-normalised.
struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  Tensor weights;                  // n_mels x n_bins
  std::vector<double> center_hz;   // n_mels, increasing
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);
MelFilterbank make_mel_filterbank(int sample_rate_hz, std::size_t n_fft, std::size_t n_mels,
                                  double fmin_hz, double fmax_hz);

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// Centre-padded (reflect) copy of the signal; pad = n_fft / 2 on each side.
std::vector<double> reflect_pad(std::span<const double> samples, std::size_t pad);

std::size_t frame_count(std::size_t n_samples, std::size_t hop);

struct MfccMatrix {
  Tensor values;  // frames x n_mfcc
};

struct AudioFeatureTensor {
  Tensor windows;  // windows x frames-per-window x n_mfcc
};

// Owns the FFT plan and every precomputed table. Not thread-safe; make one per
// thread when extracting concurrently.
class MfccExtractor {
 public:
  explicit MfccExtractor(MfccOptions options = {});
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  const MfccOptions& options() const noexcept { return options_; }
  const MelFilterbank& filterbank() const noexcept { return filterbank_; }

  // |FFT|^2 of each Hann-windowed centred frame: frames x (n_fft/2 + 1).
  Tensor power_spectrogram(std::span<const double> samples);
  // Mel projection followed by clamped decibel scaling: frames x n_mels.
  Tensor log_mel(const Tensor& power) const;
  // Orthonormal DCT-II along the mel axis, first n_mfcc coefficients.
  Tensor dct(const Tensor& log_mel) const;

  MfccMatrix extract(const AudioClip& clip);

 private:
  struct FftPlan;

  MfccOptions options_;
  MelFilterbank filterbank_;
  std::vector<double> window_;
  std::vector<double> dct_basis_;  // n_mfcc x n_mels
  std::unique_ptr<FftPlan> fft_;
};

MfccMatrix extract_mfcc(const AudioClip& clip, const MfccOptions& options = {});

AudioFeatureTensor window_chunks(const MfccMatrix& mfcc, std::size_t window = 40,
                                 std::size_t stride = 20);

// prepare_clip -> MFCC -> window_chunks.
AudioFeatureTensor audio_features(const AudioClip& clip);

}  // namespace emoseq::audio
