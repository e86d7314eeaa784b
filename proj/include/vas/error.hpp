#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vas {

enum class ErrorKind {
  InvalidInput,
  InvalidLevel,
  Config,
  BackendUnavailable,
  EmptyCaption,
  Capability,
  Parse,
  ReplayMiss,
  Extraction,
  Environment,
  Preprocess,
  Generation,
  OracleMismatch,
  Dataset,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers can branch
/// on the category (e.g. the explorer records backend failures per clip but
/// lets configuration errors propagate).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vas
