#pragma once

#include <stdexcept>
#include <string>

namespace l2l {

// Domain error raised for contract violations (bad shapes, invalid
// hyperparameters, malformed files). The CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a loss or gradient turns non-finite during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace l2l
