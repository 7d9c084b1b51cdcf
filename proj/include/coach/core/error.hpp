#pragma once

#include <stdexcept>
#include <string>

namespace coach {

/// Base for every error raised by the engine. Subsystems derive their own
/// types so callers can react to specific failure classes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace coach
