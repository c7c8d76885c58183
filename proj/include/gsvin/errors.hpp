#pragma once

#include <stdexcept>
#include <string>

namespace gsvin {

/// Operand dimensions are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An API was used out of order or on an object in the wrong state.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Input data violates a documented precondition (labels, coordinates, ranges).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Random instance generation cannot satisfy the requested configuration.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A serialized file is unreadable, truncated, of the wrong version, or fails its checksum.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric is undefined for its input (empty sample set, no successful episodes).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace gsvin
