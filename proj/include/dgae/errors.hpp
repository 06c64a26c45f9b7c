#pragma once

#include <stdexcept>
#include <string>

namespace dgae {

// Two operands disagree on a length (quantile count, state dim, layer width).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An argument lies outside the domain where the operation is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// An object is missing data the operation needs.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A loss or gradient turned NaN/inf during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, int line, const std::string& what)
      : std::runtime_error(format(field, line, what)),
        field_(std::move(field)),
        line_(line),
        reason_(what) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  static std::string format(const std::string& field, int line,
                            const std::string& what) {
    std::string msg = "config";
    if (line > 0) msg += " line " + std::to_string(line);
    if (!field.empty()) msg += " field '" + field + "'";
    return msg + ": " + what;
  }

  std::string field_;
  int line_ = 0;
  std::string reason_;
};

}  // namespace dgae
