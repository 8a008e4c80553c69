#pragma once

#include <stdexcept>
#include <string>

namespace sea {

/// Malformed arguments: dimension mismatches, out-of-range parameters, short traces.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two databases (or a fingerprint and a database) disagree on procedure ordering.
class IncompatibleDatabase : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A cluster whose mean spectrum binarizes to an empty mask.
class DegenerateTemplate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk data that cannot be parsed or does not satisfy its schema.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sea
