#pragma once

#include <stdexcept>
#include <string>

namespace facebb {

enum class ErrorCode {
  InvalidArgument = 1,
  ShapeMismatch,
  FileNotFound,
  Decode,
  Unsupported,
  Io,
  Oracle,
  Precondition,
  Degenerate,
  Internal,
};

// Every failure inside the library is reported as an Error; the C API maps
// the code one-to-one onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace facebb
