#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace graspkit {

enum class Errc {
  kEmptyInput,
  kInvalidArgument,
  kEmptyAfterPreprocess,
  kIndexOutOfRange,
  kInsufficientPoints,
  kDimensionError,
  kNoTrajectoryFound,
  kNoCandidates,
  kPreconditionViolation,
  kInvalidScene,
  kParseError,
  kValidationError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace graspkit
