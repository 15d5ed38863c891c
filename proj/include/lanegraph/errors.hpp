#pragma once

#include <stdexcept>
#include <string>

namespace lanegraph {

// Bad argument value (non-positive spacing, threshold out of range, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the domain an operation is defined on (empty mask, vertex off the field).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Infeasible scene specification. Carries the index of the offending event, or -1.
class SpecError : public std::runtime_error {
 public:
  SpecError(const std::string& what, int event_index = -1)
      : std::runtime_error(what), event_index_(event_index) {}
  int event_index() const noexcept { return event_index_; }

 private:
  int event_index_;
};

// A LaneDag that violates its structural invariants was passed where a valid one is required.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite intermediate value; the message names the offending term.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lanegraph
