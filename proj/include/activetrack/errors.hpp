#pragma once

#include <stdexcept>
#include <string>

namespace activetrack {

/// Base for every recoverable error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidWorld : public Error {
 public:
  using Error::Error;
};

class NoPath : public Error {
 public:
  using Error::Error;
};

class InvalidAction : public Error {
 public:
  using Error::Error;
};

class OutOfSpace : public Error {
 public:
  using Error::Error;
};

class PerturbationInfeasible : public Error {
 public:
  using Error::Error;
};

class EmptyTexturePool : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class DegenerateBox : public Error {
 public:
  using Error::Error;
};

/// Malformed or unknown configuration; `what()` carries the key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Problems reading or writing persisted artifacts.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace activetrack
