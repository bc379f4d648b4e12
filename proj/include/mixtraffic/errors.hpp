#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mixtraffic {

/// An argument lies outside the mathematical domain of an operation
/// (autonomy level outside [0,1], congested latency at zero flow, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A routing, demand or optimization problem admits no feasible point.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what, double best_violation = 0.0)
      : std::runtime_error(what), best_violation_(best_violation) {}

  /// Smallest constraint violation seen before giving up (0 when not applicable).
  double best_violation() const noexcept { return best_violation_; }

 private:
  double best_violation_;
};

/// Malformed input data: a file that does not parse, a recorded choice of a
/// dominated option, a configuration outside its invariants.
class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Violation {
  std::size_t road = 0;  // 0-based; meaningless for network-level violations
  std::string kind;
  std::string message;
};

class ValidationError : public std::invalid_argument {
 public:
  ValidationError(const std::string& what, std::vector<Violation> violations)
      : std::invalid_argument(what), violations_(std::move(violations)) {}
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

}  // namespace mixtraffic
