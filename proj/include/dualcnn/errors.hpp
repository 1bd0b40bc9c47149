#pragma once

#include <stdexcept>
#include <string>

namespace dualcnn {

// Error categories line up with the CLI exit codes (1 validation, 2 I/O, 3 invariant).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, shape mismatches, invalid configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or unwritable files. The message always names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but its contents are malformed (corrupt checkpoint, bad PGM header).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

/// An internal consistency check failed (e.g. a gradient check).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace dualcnn
