#pragma once

#include <stdexcept>
#include <string>

namespace debiasmix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An upstream artifact (bundle, split, checkpoint) is absent.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses, divergence, or numerically undefined quantities.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Corrupt, truncated or schema-incompatible files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace debiasmix
