#pragma once

#include <stdexcept>
#include <string>

namespace varex {

/// Base class for all engine-reported errors.
struct VarexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Internal invariant violation: indicates a bug in the engine, not in the
/// analyzed program. CLI maps this to exit code 3.
struct EngineBug : VarexError {
  using VarexError::VarexError;
};

}  // namespace varex
