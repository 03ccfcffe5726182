#pragma once

#include <stdexcept>
#include <string>

namespace iron {

// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration or precondition violation detected before any work starts.
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Malformed or mismatched file contents (bad magic, version, truncation).
class FormatError : public Error {
  public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Degenerate camera/plane geometry or projective degeneracy.
class GeometryError : public Error {
  public:
    explicit GeometryError(const std::string& msg) : Error(msg) {}
};

// Array shape mismatch in the network plumbing.
class ShapeError : public Error {
  public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Index outside the admissible region of the search grid.
class BoundsError : public Error {
  public:
    explicit BoundsError(const std::string& msg) : Error(msg) {}
};

// Non-finite values or numeric breakdown at runtime.
class NumericError : public Error {
  public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace iron
