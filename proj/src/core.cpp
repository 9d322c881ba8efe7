// SPDX-License-Identifier: Apache-2.0

#include "beacon/core.hpp"

namespace beacon {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::Truncated: return "Truncated";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::UnsupportedDtype: return "UnsupportedDtype";
    case Errc::UnsupportedBits: return "UnsupportedBits";
    case Errc::CodeOutOfRange: return "CodeOutOfRange";
    case Errc::Io: return "Io";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NonPositiveScale: return "NonPositiveScale";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::ZeroQuantizedOutput: return "ZeroQuantizedOutput";
    case Errc::ShortCalibration: return "ShortCalibration";
    case Errc::TooLarge: return "TooLarge";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IdentityViolation: return "IdentityViolation";
  }
  return "Unknown";
}

}  // namespace beacon
