// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mctk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or lengths that do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its documented domain (timestep range, scale <= 0, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A numeric contract was violated: non-finite values, failed invariant checks.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. `offset` is the byte position where parsing failed,
/// or npos when the error is not tied to a position (JSON schema errors).
class FormatError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit FormatError(const std::string& what, std::size_t offset = npos)
      : Error(offset == npos ? what : what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// File system failures: missing input, unwritable output.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mctk
