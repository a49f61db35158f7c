#pragma once

#include <stdexcept>
#include <string>

namespace prodigy {

/// A precondition on an input or parameter was violated.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numerics produced a non-finite value (e.g. diverged logits).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace prodigy
