#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace covsteer {

enum class ErrorKind {
  InvalidInput,
  NotPsd,
  NotPositiveDefinite,
  DimMismatch,
  StructureViolation,
  InnerSolveFailed,
  LineSearchFailed,
  InsufficientSamples,
  InternalConsistency,
  Config,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NotPsd: return "NotPsd";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::StructureViolation: return "StructureViolation";
    case ErrorKind::InnerSolveFailed: return "InnerSolveFailed";
    case ErrorKind::LineSearchFailed: return "LineSearchFailed";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::InternalConsistency: return "InternalConsistency";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

// Every failure raised by the library carries a kind so callers can branch
// without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace covsteer
