#include "nondiss/errors.hpp"

namespace nondiss {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidSize: return "invalid-size";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kShapeMismatch: return "shape-mismatch";
    case ErrorKind::kDegenerateDegree: return "degenerate-degree";
    case ErrorKind::kNumericFailure: return "numeric-failure";
    case ErrorKind::kNumericOverflow: return "numeric-overflow";
    case ErrorKind::kStaleTape: return "stale-tape";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kEmpty: return "empty";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace nondiss
