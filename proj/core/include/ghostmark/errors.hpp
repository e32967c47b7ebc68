#pragma once

#include <stdexcept>
#include <string>

namespace ghostmark {

// Error hierarchy shared by all modules. The CLI maps these onto its exit
// codes: ParseError/ValidationError -> 2, RemoteError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input that could not be read at all (bad JSON, bad JSONL line).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a domain invariant (duplicate marker id,
// empty pattern, degenerate statistics input, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Remote endpoint failures that survived the retry policy.
class RemoteError : public Error {
 public:
  using Error::Error;
};

class AuthError : public RemoteError {
 public:
  using RemoteError::RemoteError;
};

}  // namespace ghostmark
