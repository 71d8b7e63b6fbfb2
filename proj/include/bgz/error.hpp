#pragma once

#include <stdexcept>
#include <string>

namespace bgz {

// Bad input: malformed files, invalid configuration, contract violations by
// the caller. The CLI maps this to exit status 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while executing a valid request (graph engine, IO, divergence).
// The CLI maps this to exit status 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bgz
