#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace savbdf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedOrder : public Error {
 public:
  explicit UnsupportedOrder(int k)
      : Error("unsupported order: " + std::to_string(k) + " (allowed 1..5)") {}
};

class GridMismatch : public Error {
 public:
  GridMismatch() : Error("fields live on different grids") {}
};

class InsufficientHistory : public Error {
 public:
  InsufficientHistory(std::size_t needed, std::size_t have)
      : Error("insufficient history: need " + std::to_string(needed) +
              " levels, have " + std::to_string(have)) {}
};

class IndefiniteOperator : public Error {
 public:
  explicit IndefiniteOperator(std::size_t mode)
      : Error("indefinite operator: non-positive denominator at mode " +
              std::to_string(mode)) {}
};

class WrongBasis : public Error {
 public:
  explicit WrongBasis(const std::string& what) : Error("wrong basis: " + what) {}
};

/// Raised when a step produces non-finite values.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::size_t step)
      : Error("divergence detected at step " + std::to_string(step)),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace savbdf
