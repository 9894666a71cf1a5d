#pragma once

#include <stdexcept>
#include <string>

namespace metaood {

/// Input failed validation (malformed file, inconsistent dimensions, unknown name).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a finite result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested functionality is disabled by configuration.
class UnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace metaood
