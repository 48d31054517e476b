#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace segslam {

enum class ErrorCode {
  kZeroDepth,
  kBehindCamera,
  kEmptyRegion,
  kEmptyProjection,
  kDimensionMismatch,
  kUnknownClass,
  kDegenerate,
  kInvalidSpec,
  kInsufficientOverlap,
  kInvalidArgument,
  kIo,
  kParse,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries one of the codes above so
/// callers can branch on the kind (e.g. skip a pixel on kZeroDepth, mark a
/// frame lost on kDegenerate) without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace segslam
