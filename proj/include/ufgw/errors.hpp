#pragma once

#include <stdexcept>
#include <string>

namespace ufgw {

// CLI exit codes: 0 ok, 1 usage, 2 input/validation, 3 numerical failure.
enum class ExitCode : int {
  ok = 0,
  usage = 1,
  input = 2,
  numerical = 3,
};

// Bad command-line usage or malformed configuration keys.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or malformed input data (files, ids, dimensions).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally invalid data that parsed fine (isolated node, zero row, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values, kernel underflow and friends.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Broken internal invariant; always a bug.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace ufgw
