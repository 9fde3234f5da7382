#pragma once

#include <stdexcept>
#include <string>

namespace nondiss {

enum class ErrorKind {
  kInvalidSize,
  kInvalidArgument,
  kShapeMismatch,
  kDegenerateDegree,
  kNumericFailure,
  kNumericOverflow,
  kStaleTape,
  kParse,
  kEmpty,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace nondiss
