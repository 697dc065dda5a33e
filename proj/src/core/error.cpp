// SPDX-License-Identifier: Apache-2.0
#include "xhy/core/error.hpp"

namespace xhy {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kShapeMismatch: return "shape_mismatch";
    case ErrorKind::kMissingPrerequisite: return "missing_prerequisite";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kAuth: return "auth";
    case ErrorKind::kTransport: return "transport";
    case ErrorKind::kNumeric: return "numeric";
  }
  return "unknown";
}

}  // namespace xhy
