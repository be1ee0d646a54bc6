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

#include "emoseq/error.hpp"

namespace emoseq {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoFailure";
    case ErrorCode::kMalformedWav: return "MalformedWav";
    case ErrorCode::kUnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::kEmptyAudio: return "EmptyAudio";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kTooFewFrames: return "TooFewFrames";
    case ErrorCode::kNoFrames: return "NoFrames";
    case ErrorCode::kInconsistentDimensions: return "InconsistentDimensions";
    case ErrorCode::kMalformedImage: return "MalformedImage";
    case ErrorCode::kWrongFrameSize: return "WrongFrameSize";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kModelNotBuilt: return "ModelNotBuilt";
    case ErrorCode::kTooFewSpeakers: return "TooFewSpeakers";
    case ErrorCode::kMissingFeatures: return "MissingFeatures";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kZeroMetricValue: return "ZeroMetricValue";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kUnknownConfigKey: return "UnknownConfigKey";
    case ErrorCode::kHeadMismatch: return "HeadMismatch";
  }
  return "Unknown";
}

}  // namespace emoseq
