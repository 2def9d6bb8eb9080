#pragma once

#include <stdexcept>
#include <string>

namespace intrinsic {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raster shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Caller passed an out-of-range parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed encoded image bytes.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Well-formed image in a layout we do not support.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A normalization support whose mean is zero or negative.
class DegenerateRegionError : public Error {
 public:
  DegenerateRegionError(const std::string& what, int region_id = -1)
      : Error(what), region_id_(region_id) {}
  int region_id() const noexcept { return region_id_; }

 private:
  int region_id_;
};

/// Malformed or unsupported serialized document. `location` is a byte offset
/// or JSON pointer when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string location = {})
      : Error(location.empty() ? what : what + " at " + location),
        location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

class MergeConflictError : public Error {
 public:
  using Error::Error;
};

/// An edge accuracy was requested over an empty edge set.
class UndefinedAccuracyError : public Error {
 public:
  using Error::Error;
};

/// An annotation failed validation against its image.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Energy became non-finite during descent.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace intrinsic
