#pragma once

// Exception hierarchy shared by every module. All library errors derive from
// distpose::Error so callers can catch the whole family or a specific kind.

#include <stdexcept>
#include <string>

namespace distpose {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition on an argument (bad range, length mismatch, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// An operation that needs data received an empty cloud / set.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Geometrically degenerate configuration (collinear fit, zero diameter, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Too few samples to run the estimator at all (< 3 correspondences, ...).
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A file did not parse: bad magic, bad header, truncated payload, ...
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Parsed data violates a semantic contract (non-finite values, det = -1, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Stored payload does not match its recorded checksum.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure while reading or writing artifacts.
class StorageError : public Error {
 public:
  using Error::Error;
};

/// A referenced file or entry does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Cross-structure indices disagree (correspondence map vs. feature matrix).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// RANSAC exhausted its budget without one accepted hypothesis.
class NoHypothesisError : public Error {
 public:
  using Error::Error;
};

/// ICP found zero matched pairs on the first iteration.
class NoOverlapError : public Error {
 public:
  using Error::Error;
};

/// Scene synthesis could not produce a usable scene.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace distpose
