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

#include "emoseq/audio_features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

#include "emoseq/error.hpp"

namespace emoseq::audio {

namespace {

// FFTW planning mutates global state; execution with new-array calls does not.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct MfccExtractor::FftPlan {
  explicit FftPlan(std::size_t n) : n(n) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t n;
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
};

AudioClip prepare_clip(const AudioClip& clip) {
  if (clip.samples.empty()) fail(ErrorCode::kEmptyAudio, "audio clip has no samples");
  if (clip.sample_rate_hz <= 0) fail(ErrorCode::kInvalidArgument, "sample rate must be positive");

  AudioClip out;
  out.sample_rate_hz = kTargetSampleRate;
  if (clip.sample_rate_hz == kTargetSampleRate) {
    out.samples = clip.samples;
  } else {
    const auto n = static_cast<std::int64_t>(clip.samples.size());
    const std::int64_t src = clip.sample_rate_hz;
    const std::int64_t dst = kTargetSampleRate;
    const std::int64_t n_out = std::max<std::int64_t>(1, (n * dst + src / 2) / src);
    out.samples.resize(static_cast<std::size_t>(n_out));
    for (std::int64_t i = 0; i < n_out; ++i) {
      // Source position i * src / dst, kept as an exact rational.
      const std::int64_t num = i * src;
      const std::int64_t i0 = num / dst;
      const double frac = static_cast<double>(num - i0 * dst) / static_cast<double>(dst);
      const double a = clip.samples[static_cast<std::size_t>(std::min(i0, n - 1))];
      const double b = clip.samples[static_cast<std::size_t>(std::min(i0 + 1, n - 1))];
      out.samples[static_cast<std::size_t>(i)] = a + (b - a) * frac;
    }
  }
  out.samples.resize(kTargetSamples, 0.0);
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank make_mel_filterbank(int sample_rate_hz, std::size_t n_fft, std::size_t n_mels,
                                  double fmin_hz, double fmax_hz) {
  if (n_mels == 0 || n_fft < 2 || !(fmax_hz > fmin_hz) || fmin_hz < 0.0) {
    fail(ErrorCode::kInvalidArgument, "invalid mel filterbank parameters");
  }
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_fft / 2 + 1;
  fb.weights = Tensor({n_mels, fb.n_bins});

  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                    static_cast<double>(n_mels + 1);
    edges[i] = mel_to_hz(mel);
  }
  const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(n_fft);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double norm = 2.0 / (hi - lo);
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double rising = (f - lo) / (mid - lo);
      const double falling = (hi - f) / (hi - mid);
      const double w = std::max(0.0, std::min(rising, falling));
      fb.weights[m * fb.n_bins + k] = w * norm;
    }
    fb.center_hz.push_back(mid);
  }
  return fb;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

std::vector<double> reflect_pad(std::span<const double> samples, std::size_t pad) {
  if (samples.size() <= pad) {
    fail(ErrorCode::kTooFewFrames, "signal of " + std::to_string(samples.size()) +
                                       " samples is too short for centred framing");
  }
  const std::size_t n = samples.size();
  std::vector<double> out(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    out[i] = samples[pad - i];
    out[pad + n + i] = samples[n - 2 - i];
  }
  std::copy(samples.begin(), samples.end(), out.begin() + static_cast<std::ptrdiff_t>(pad));
  return out;
}

std::size_t frame_count(std::size_t n_samples, std::size_t hop) { return 1 + n_samples / hop; }

MfccExtractor::MfccExtractor(MfccOptions options)
    : options_(options),
      filterbank_(make_mel_filterbank(options.sample_rate_hz, options.n_fft, options.n_mels,
                                      options.fmin_hz, options.fmax_hz)),
      window_(hann_window(options.n_fft)),
      fft_(std::make_unique<FftPlan>(options.n_fft)) {
  if (options_.n_mfcc == 0 || options_.n_mfcc > options_.n_mels || options_.hop == 0) {
    fail(ErrorCode::kInvalidArgument, "invalid MFCC options");
  }
  const std::size_t n = options_.n_mels;
  dct_basis_.resize(options_.n_mfcc * n);
  for (std::size_t k = 0; k < options_.n_mfcc; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                            : std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      dct_basis_[k * n + i] =
          s * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                       (2.0 * static_cast<double>(n)));
    }
  }
}

MfccExtractor::~MfccExtractor() = default;

Tensor MfccExtractor::power_spectrogram(std::span<const double> samples) {
  for (double s : samples) {
    if (!std::isfinite(s)) fail(ErrorCode::kNonFiniteInput, "audio contains NaN or Inf samples");
  }
  const std::size_t n_fft = options_.n_fft;
  const std::vector<double> padded = reflect_pad(samples, n_fft / 2);
  const std::size_t frames = frame_count(samples.size(), options_.hop);
  const std::size_t bins = n_fft / 2 + 1;
  Tensor power({frames, bins});
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = padded.data() + f * options_.hop;
    for (std::size_t i = 0; i < n_fft; ++i) fft_->in[i] = src[i] * window_[i];
    fftw_execute_dft_r2c(fft_->plan, fft_->in, fft_->out);
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = fft_->out[k][0];
      const double im = fft_->out[k][1];
      power[f * bins + k] = re * re + im * im;
    }
  }
  return power;
}

Tensor MfccExtractor::log_mel(const Tensor& power) const {
  const std::size_t frames = power.dim(0);
  const std::size_t bins = filterbank_.n_bins;
  const std::size_t mels = filterbank_.n_mels;
  if (power.rank() != 2 || power.dim(1) != bins) {
    fail(ErrorCode::kShapeMismatch, "power spectrogram has " + shape_to_string(power.shape()));
  }
  Tensor out({frames, mels});
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t m = 0; m < mels; ++m) {
      const double* w = filterbank_.weights.data() + m * bins;
      const double* p = power.data() + f * bins;
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += w[k] * p[k];
      const double db = 10.0 * std::log10(std::max(e, options_.amin));
      out[f * mels + m] = db;
      peak = std::max(peak, db);
    }
  }
  const double floor = peak - options_.top_db;
  for (auto& v : out.values()) v = std::max(v, floor);
  return out;
}

Tensor MfccExtractor::dct(const Tensor& log_mel) const {
  const std::size_t frames = log_mel.dim(0);
  const std::size_t n = options_.n_mels;
  const std::size_t n_out = options_.n_mfcc;
  Tensor out({frames, n_out});
  std::vector<double> centered(n);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* row = log_mel.data() + f * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += row[i];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered[i] = row[i] - mean;
    // Higher basis vectors sum to zero, so they see only the centred part;
    // this keeps a flat spectrum's higher coefficients exactly 0.
    out[f * n_out] = mean * std::sqrt(static_cast<double>(n));
    for (std::size_t k = 1; k < n_out; ++k) {
      const double* basis = dct_basis_.data() + k * n;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += basis[i] * centered[i];
      out[f * n_out + k] = acc;
    }
  }
  return out;
}

MfccMatrix MfccExtractor::extract(const AudioClip& clip) {
  return MfccMatrix{dct(log_mel(power_spectrogram(clip.samples)))};
}

MfccMatrix extract_mfcc(const AudioClip& clip, const MfccOptions& options) {
  MfccExtractor extractor(options);
  return extractor.extract(clip);
}

AudioFeatureTensor window_chunks(const MfccMatrix& mfcc, std::size_t window, std::size_t stride) {
  const Tensor& m = mfcc.values;
  if (m.rank() != 2) fail(ErrorCode::kShapeMismatch, "MFCC matrix must be 2-D");
  if (window == 0 || stride == 0) fail(ErrorCode::kInvalidArgument, "window and stride must be positive");
  const std::size_t frames = m.dim(0);
  const std::size_t coeffs = m.dim(1);
  if (frames < window) {
    fail(ErrorCode::kTooFewFrames, "need at least " + std::to_string(window) + " frames, got " +
                                       std::to_string(frames));
  }
  const std::size_t count = (frames - window) / stride + 1;
  Tensor out({count, window, coeffs});
  for (std::size_t k = 0; k < count; ++k) {
    std::copy_n(m.data() + k * stride * coeffs, window * coeffs, out.data() + k * window * coeffs);
  }
  return AudioFeatureTensor{std::move(out)};
}

AudioFeatureTensor audio_features(const AudioClip& clip) {
  return window_chunks(extract_mfcc(prepare_clip(clip)));
}

}  // namespace emoseq::audio
