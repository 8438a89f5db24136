#pragma once

#include <stdexcept>

namespace u1 {

/// Malformed or inconsistent input data (bad file, bad manifest, shape mismatch).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values produced during training or inference.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace u1
