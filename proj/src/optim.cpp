#include "mixtraffic/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace mixtraffic::optim {

namespace {

constexpr double kArmijo = 1e-4;

struct Pair {
  Vector s;
  Vector y;
  double rho;
};

double eval(const GradientFunction& fun, const Vector& x, Vector& g) {
  g.setZero(x.size());
  const double f = fun(x, g);
  if (!std::isfinite(f) || !g.allFinite()) return std::numeric_limits<double>::infinity();
  return f;
}

Vector free_mask(const Vector& x, const Vector& g, const Bounds& b) {
  Vector mask(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool pinned = b.lower[i] >= b.upper[i];
    const bool at_lower = x[i] <= b.lower[i] && g[i] > 0.0;
    const bool at_upper = x[i] >= b.upper[i] && g[i] < 0.0;
    mask[i] = (pinned || at_lower || at_upper) ? 0.0 : 1.0;
  }
  return mask;
}

Vector two_loop(const std::deque<Pair>& memory, const Vector& g, const Vector& mask) {
  Vector q = g.cwiseProduct(mask);
  std::vector<double> alpha(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    const auto& p = memory[k];
    alpha[k] = p.rho * p.s.cwiseProduct(mask).dot(q);
    q -= alpha[k] * p.y.cwiseProduct(mask);
  }
  if (!memory.empty()) {
    const auto& last = memory.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const auto& p = memory[k];
    const double beta = p.rho * p.y.cwiseProduct(mask).dot(q);
    q += p.s.cwiseProduct(mask) * (alpha[k] - beta);
  }
  return -q.cwiseProduct(mask);
}

double projected_gradient_norm(const Vector& x, const Vector& g, const Bounds& b) {
  if (x.size() == 0) return 0.0;
  return (b.clamp(x - g) - x).lpNorm<Eigen::Infinity>();
}

}  // namespace

LbfgsResult minimize_bounded(const GradientFunction& fun, const Vector& x0, const Bounds& bounds,
                             const LbfgsOptions& options) {
  LbfgsResult res;
  Vector x = bounds.clamp(x0);
  Vector g(x.size());
  double f = eval(fun, x, g);
  res.evaluations = 1;
  std::deque<Pair> memory;
  int stalls = 0;

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (!std::isfinite(f)) break;
    if (projected_gradient_norm(x, g, bounds) <= options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    const Vector mask = free_mask(x, g, bounds);
    Vector d = two_loop(memory, g, mask);
    if (!(g.dot(d) < 0.0)) {
      memory.clear();
      d = -g.cwiseProduct(mask);
    }
    if (d.lpNorm<Eigen::Infinity>() == 0.0) {
      // Every variable is pinned against a bound it wants to cross.
      res.converged = true;
      break;
    }
    double t = memory.empty() ? std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>()) : 1.0;

    bool accepted = false;
    Vector xn;
    Vector gn(x.size());
    double fn = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      xn = bounds.clamp(x + t * d);
      const Vector step = xn - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      fn = eval(fun, xn, gn);
      ++res.evaluations;
      if (fn <= f + kArmijo * g.dot(step)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (!memory.empty()) {
        memory.clear();
        continue;
      }
      break;
    }

    const Vector s = xn - x;
    const Vector y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      memory.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }
    stalls = (f - fn) <= 1e-15 * std::max(1.0, std::abs(f)) ? stalls + 1 : 0;
    x = xn;
    f = fn;
    g = gn;
    if (stalls >= 5) break;
  }
  res.x = x;
  res.value = f;
  if (!res.converged) res.converged = projected_gradient_norm(x, g, bounds) <= options.gradient_tolerance;
  return res;
}

double max_violation(const NlpProblem& problem, const Vector& x) {
  double viol = 0.0;
  if (problem.equality_count > 0) {
    Vector c(problem.equality_count);
    Matrix jc(problem.equality_count, x.size());
    problem.equalities(x, c, jc);
    viol = std::max(viol, c.lpNorm<Eigen::Infinity>());
  }
  if (problem.inequality_count > 0) {
    Vector h(problem.inequality_count);
    Matrix jh(problem.inequality_count, x.size());
    problem.inequalities(x, h, jh);
    viol = std::max(viol, h.cwiseMax(0.0).maxCoeff());
  }
  return viol;
}

AugLagResult solve_augmented_lagrangian(const NlpProblem& problem, const Vector& x0,
                                        const AugLagOptions& options) {
  const Eigen::Index n = x0.size();
  const Eigen::Index me = problem.equality_count;
  const Eigen::Index mi = problem.inequality_count;
  Vector mu = Vector::Zero(me);
  Vector nu = Vector::Zero(mi);
  double rho = options.initial_penalty;

  Vector c(me), h(mi);
  Matrix jc(me, n), jh(mi, n);

  auto lagrangian = [&](const Vector& x, Vector& grad) {
    double value = problem.objective(x, grad);
    if (me > 0) {
      problem.equalities(x, c, jc);
      value += mu.dot(c) + 0.5 * rho * c.squaredNorm();
      grad += jc.transpose() * (mu + rho * c);
    }
    if (mi > 0) {
      problem.inequalities(x, h, jh);
      const Vector shifted = (nu + rho * h).cwiseMax(0.0);
      value += (shifted.squaredNorm() - nu.squaredNorm()) / (2.0 * rho);
      grad += jh.transpose() * shifted;
    }
    return value;
  };

  AugLagResult res;
  Vector x = problem.bounds.clamp(x0);
  double previous = std::numeric_limits<double>::infinity();
  for (res.outer_iterations = 0; res.outer_iterations < options.max_outer_iterations;
       ++res.outer_iterations) {
    const int budget = options.max_iterations - res.iterations;
    if (budget <= 0) break;
    LbfgsOptions inner;
    inner.max_iterations = budget;
    inner.gradient_tolerance =
        std::max(options.optimality_tolerance, std::pow(0.1, res.outer_iterations + 2));
    const LbfgsResult sub = minimize_bounded(lagrangian, x, problem.bounds, inner);
    res.iterations += std::max(sub.iterations, 1);
    x = sub.x;

    const double viol = max_violation(problem, x);
    if (me > 0) {
      problem.equalities(x, c, jc);
      mu += rho * c;
    }
    if (mi > 0) {
      problem.inequalities(x, h, jh);
      nu = (nu + rho * h).cwiseMax(0.0);
    }
    if (viol <= options.constraint_tolerance && sub.converged &&
        inner.gradient_tolerance <= options.optimality_tolerance) {
      res.converged = true;
      break;
    }
    if (viol > 0.25 * previous) rho = std::min(rho * options.penalty_growth, options.max_penalty);
    previous = viol;
  }
  res.x = x;
  Vector grad(n);
  res.objective = problem.objective(x, grad);
  res.max_violation = max_violation(problem, x);
  return res;
}

}  // namespace mixtraffic::optim
