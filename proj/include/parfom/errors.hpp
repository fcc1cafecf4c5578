#pragma once

#include <stdexcept>
#include <string>

namespace parfom {

// Caller broke a precondition that is checkable, e.g. mismatched dimensions.
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Bad numeric input such as a non-finite coordinate.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// The query needs information the instance does not carry (e.g. f* or X*).
class UnsupportedQuery : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigurationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Raised when a method detects an inconsistent oracle (line search never ends).
class DiagnosticError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace parfom
