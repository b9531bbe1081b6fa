#pragma once

#include <stdexcept>

namespace art {

/// A vector, matrix or box does not match the dimension it is combined with.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file. The message carries the line or byte position.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An API was called out of order, e.g. `backward` on a tape without a loss.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace art
