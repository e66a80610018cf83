#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gsanim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition or type invariant was violated (dimension mismatch,
/// non-unit quaternion, non-rigid transform, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class AssetErrorKind { syntax, bounds, invariant, io };

const char* to_string(AssetErrorKind kind);

/// Failure while parsing or writing an on-disk asset. `location` is a byte
/// offset for binary formats and a 1-based line number for text formats.
class AssetError : public Error {
 public:
  AssetError(AssetErrorKind kind, std::uint64_t location, const std::string& message);

  AssetErrorKind kind() const {
    return kind_;
  }
  std::uint64_t location() const {
    return location_;
  }

 private:
  AssetErrorKind kind_;
  std::uint64_t location_;
};

} // namespace gsanim
