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

#include <stdexcept>
#include <string>

namespace emoseq {

// Every failure surfaced by the library carries one of these codes. The C API
// maps them one-to-one onto emoseq_status values.
enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kMalformedWav,
  kUnsupportedEncoding,
  kEmptyAudio,
  kNonFiniteInput,
  kTooFewFrames,
  kNoFrames,
  kInconsistentDimensions,
  kMalformedImage,
  kWrongFrameSize,
  kShapeMismatch,
  kNonFiniteValue,
  kDegenerateBatch,
  kLabelOutOfRange,
  kNonFiniteGradient,
  kNotScalar,
  kModelNotBuilt,
  kTooFewSpeakers,
  kMissingFeatures,
  kNonFiniteLoss,
  kEmptySplit,
  kLengthMismatch,
  kIndexOutOfRange,
  kZeroMetricValue,
  kMalformedFile,
  kUnknownConfigKey,
  kHeadMismatch,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace emoseq
