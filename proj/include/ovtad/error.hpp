#pragma once

#include <stdexcept>
#include <string>

namespace ovtad {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input could not be parsed (malformed JSON, wrong schema, bad binary header).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a domain invariant (end <= start, overlap, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied argument outside its contract.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ovtad
