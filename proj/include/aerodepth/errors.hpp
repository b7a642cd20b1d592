#pragma once

#include <stdexcept>
#include <string>

namespace aerodepth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain arguments.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unknown configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Synthetic scene description that cannot be rendered.
class SceneError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised by the trainer when a loss becomes NaN or infinite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace aerodepth
