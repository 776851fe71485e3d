#pragma once

#include <stdexcept>
#include <string>

namespace hexpose {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document or binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but geometrically unusable (coincident points,
/// zero-extent configurations, empty libraries).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// Inference ran out of hypotheses at some level.
class NoConfiguration : public Error {
 public:
  using Error::Error;
};

}  // namespace hexpose
