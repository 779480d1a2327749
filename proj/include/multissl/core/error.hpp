#pragma once

#include <stdexcept>
#include <string>

namespace multissl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration. The CLI maps it to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system or serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace multissl
