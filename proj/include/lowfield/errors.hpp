#pragma once

#include <stdexcept>
#include <string>

namespace lowfield {

// Exception hierarchy shared by every module. Argument validation uses
// std::invalid_argument directly; the types below name the failure class the
// CLI maps onto exit codes.

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file contents. The message names the offending header field.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor or grid shapes that cannot be processed together.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a training loss becomes NaN or infinite.
struct NonFiniteLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lowfield
