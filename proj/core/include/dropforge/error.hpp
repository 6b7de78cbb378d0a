#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dropforge {

enum class ErrorKind {
  kInvalidDimension,
  kFormat,
  kLabel,
  kShape,
  kNumeric,
  kDomain,
  kConfig,
  kTraining,
  kFile,
  kUsage,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace dropforge
