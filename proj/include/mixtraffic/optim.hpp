#pragma once

#include <Eigen/Dense>
#include <functional>

namespace mixtraffic::optim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Bounds {
  Vector lower;
  Vector upper;

  Vector clamp(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

/// Returns f(x) and writes the gradient into `grad` (already sized).
using GradientFunction = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsOptions {
  int max_iterations = 500;
  /// Infinity norm of the projected gradient at which we stop.
  double gradient_tolerance = 1e-6;
  int memory = 10;
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Projected L-BFGS for box constraints: variables at an active bound are
/// frozen for the quasi-Newton direction, the step is projected back onto the
/// box and accepted by Armijo backtracking along the projected path.
LbfgsResult minimize_bounded(const GradientFunction& fun, const Vector& x0, const Bounds& bounds,
                             const LbfgsOptions& options = {});

/// Writes constraint values and their dense Jacobian (rows = constraints).
using ConstraintFunction = std::function<void(const Vector& x, Vector& values, Matrix& jacobian)>;

/// minimize f(x) s.t. c(x) = 0, g(x) <= 0, lower <= x <= upper.
struct NlpProblem {
  Bounds bounds;
  GradientFunction objective;
  Eigen::Index equality_count = 0;
  ConstraintFunction equalities;
  Eigen::Index inequality_count = 0;
  ConstraintFunction inequalities;
};

struct AugLagOptions {
  double constraint_tolerance = 1e-6;
  double optimality_tolerance = 1e-6;
  /// Cap on the total number of inner quasi-Newton iterations.
  int max_iterations = 500;
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  double max_penalty = 1e10;
  int max_outer_iterations = 40;
};

struct AugLagResult {
  Vector x;
  double objective = 0.0;
  double max_violation = 0.0;
  int iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
};

/// Powell-Hestenes-Rockafellar augmented Lagrangian with the bounded L-BFGS
/// above as inner solver.
AugLagResult solve_augmented_lagrangian(const NlpProblem& problem, const Vector& x0,
                                        const AugLagOptions& options = {});

/// Largest constraint violation of x (equality magnitude or positive inequality part).
double max_violation(const NlpProblem& problem, const Vector& x);

}  // namespace mixtraffic::optim
