#pragma once

#include <stdexcept>
#include <string>

namespace cqpv {

/// Operands of incompatible dimension.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A conditioning event has (numerically) zero probability.
class DegenerateConditioning : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A strategy produced output before the information it depends on could
/// have reached it, or in the wrong protocol order.
class CausalityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A Monte Carlo estimate has no samples to be computed from.
class UndefinedEstimate : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Configuration could not be parsed or validated. `where` names the
/// offending field (JSON pointer) when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what),
        where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace cqpv
