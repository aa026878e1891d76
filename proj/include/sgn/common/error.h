// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgn {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or signal geometries that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf was produced by an operation.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string &what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Checkpoint or manifest that does not match what the caller expects.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgn
