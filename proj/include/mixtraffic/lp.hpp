#pragma once

#include <vector>

namespace mixtraffic::lp {

enum class Sense { less_equal, equal, greater_equal };

struct Constraint {
  std::vector<double> coefficients;
  Sense sense = Sense::less_equal;
  double rhs = 0.0;
};

/// maximize objective . x  subject to constraints, x >= 0.
struct Program {
  std::vector<double> objective;
  std::vector<Constraint> constraints;

  std::size_t variables() const noexcept { return objective.size(); }
  void add(std::vector<double> coefficients, Sense sense, double rhs) {
    constraints.push_back({std::move(coefficients), sense, rhs});
  }
};

enum class Status { optimal, infeasible, unbounded };

struct Solution {
  Status status = Status::infeasible;
  double value = 0.0;
  std::vector<double> x;
};

/// Dense two-phase tableau simplex with Bland's rule. Meant for the small
/// programs of the equilibrium solvers (a few dozen columns at most).
Solution solve(const Program& program, double tolerance = 1e-9);

}  // namespace mixtraffic::lp
