#pragma once

#include <stdexcept>
#include <string>

namespace orchestra {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown tool name.
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// Malformed tool call, record, or dataset.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A tool was invoked before the scene was initialised.
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// A value has no token, or a token id has no value.
class EncodingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace orchestra
