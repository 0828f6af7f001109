#pragma once

#include <stdexcept>
#include <string>

namespace ctsynth {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid parameter, configuration, or usage. Maps to CLI exit code 2.
struct ParamError : Error {
  using Error::Error;
};

// Problems with input data (files, geometry). Maps to CLI exit code 3.
struct DataError : Error {
  using Error::Error;
};

// Malformed or unsupported file content.
struct FormatError : DataError {
  using DataError::DataError;
};

// Filesystem / stream failure.
struct IoError : DataError {
  using DataError::DataError;
};

// Two grids that must share geometry do not.
struct GeometryError : DataError {
  using DataError::DataError;
};

// A metric is undefined for the given input (e.g. empty lesion mask).
struct MetricError : Error {
  using Error::Error;
};

}  // namespace ctsynth
