#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace saddle {

/// Precondition violated by the caller (bad index, wrong dimension, bad parameter).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared in an oracle output or an iterate.
class NumericError : public std::runtime_error {
 public:
  enum class Where { component, iteration };

  NumericError(const std::string& what, Where where, std::size_t index)
      : std::runtime_error(what), where_(where), index_(index) {}

  Where where() const { return where_; }
  /// Component index (Where::component) or iteration counter (Where::iteration).
  std::size_t index() const { return index_; }

 private:
  Where where_;
  std::size_t index_;
};

/// Malformed run configuration or command line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace saddle

namespace saddle {

/// A generated problem failed its construction-time checks.
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace saddle
