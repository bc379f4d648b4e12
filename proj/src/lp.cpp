#include "mixtraffic/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mixtraffic::lp {

namespace {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0), basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  double& cost(std::size_t c) { return at(rows_, c); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    const double inv = 1.0 / at(r, c);
    for (std::size_t j = 0; j <= cols_; ++j) at(r, j) *= inv;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double factor = at(i, c);
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) at(i, j) -= factor * at(r, j);
      at(i, c) = 0.0;
    }
    basis_[r] = c;
  }

  // Rebuilds the reduced-cost row for the minimization of `costs`.
  void price(const std::vector<double>& costs) {
    for (std::size_t j = 0; j <= cols_; ++j) cost(j) = j < cols_ ? costs[j] : 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double cb = costs[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) cost(j) -= cb * at(r, j);
    }
  }

  // Returns false when unbounded. Columns with allowed[j] == false never enter.
  bool minimize(const std::vector<bool>& allowed, double tol) {
    const std::size_t max_pivots = 50 * (rows_ + cols_) + 1000;
    for (std::size_t it = 0; it < max_pivots; ++it) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (allowed[j] && cost(j) < -tol) {
          enter = j;
          break;
        }
      }
      if (enter == cols_) return true;
      std::size_t leave = rows_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows_; ++r) {
        const double a = at(r, enter);
        if (a <= tol) continue;
        const double ratio = rhs(r) / a;
        if (ratio < best - tol || (ratio <= best + tol && leave < rows_ && basis_[r] < basis_[leave])) {
          best = ratio;
          leave = r;
        }
      }
      if (leave == rows_) return false;
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex pivot limit exceeded");
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
  std::vector<std::size_t> basis_;
};

}  // namespace

Solution solve(const Program& program, double tolerance) {
  const std::size_t n = program.variables();
  const std::size_t m = program.constraints.size();

  std::size_t slack_count = 0;
  std::size_t artificial_count = 0;
  for (const auto& c : program.constraints) {
    if (c.coefficients.size() != n) throw std::invalid_argument("constraint width mismatch");
    const bool flip = c.rhs < 0.0;
    Sense s = c.sense;
    if (flip && s != Sense::equal) s = s == Sense::less_equal ? Sense::greater_equal : Sense::less_equal;
    if (s != Sense::equal) ++slack_count;
    if (s != Sense::less_equal) ++artificial_count;
  }

  const std::size_t first_slack = n;
  const std::size_t first_artificial = n + slack_count;
  const std::size_t cols = n + slack_count + artificial_count;
  Tableau t(m, cols);

  std::size_t next_slack = first_slack;
  std::size_t next_artificial = first_artificial;
  for (std::size_t r = 0; r < m; ++r) {
    const auto& c = program.constraints[r];
    double scale = std::abs(c.rhs);
    for (double v : c.coefficients) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) scale = 1.0;
    const double sign = c.rhs < 0.0 ? -1.0 : 1.0;
    Sense s = c.sense;
    if (sign < 0 && s != Sense::equal) s = s == Sense::less_equal ? Sense::greater_equal : Sense::less_equal;
    for (std::size_t j = 0; j < n; ++j) t.at(r, j) = sign * c.coefficients[j] / scale;
    t.rhs(r) = sign * c.rhs / scale;
    if (s == Sense::less_equal) {
      t.at(r, next_slack) = 1.0;
      t.basis()[r] = next_slack++;
    } else {
      if (s == Sense::greater_equal) t.at(r, next_slack++) = -1.0;
      t.at(r, next_artificial) = 1.0;
      t.basis()[r] = next_artificial++;
    }
  }

  std::vector<bool> allowed(cols, true);
  if (artificial_count > 0) {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t j = first_artificial; j < cols; ++j) phase1[j] = 1.0;
    t.price(phase1);
    t.minimize(allowed, tolerance);
    if (-t.cost(cols) > tolerance * std::max<double>(1.0, static_cast<double>(m))) {
      return {Status::infeasible, 0.0, {}};
    }
    // Drive zero-level artificials out of the basis where possible.
    for (std::size_t r = 0; r < m; ++r) {
      if (t.basis()[r] < first_artificial) continue;
      for (std::size_t j = 0; j < first_artificial; ++j) {
        if (std::abs(t.at(r, j)) > tolerance) {
          t.pivot(r, j);
          break;
        }
      }
    }
    for (std::size_t j = first_artificial; j < cols; ++j) allowed[j] = false;
  }

  std::vector<double> phase2(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = -program.objective[j];
  t.price(phase2);
  if (!t.minimize(allowed, tolerance)) return {Status::unbounded, 0.0, {}};

  Solution sol;
  sol.status = Status::optimal;
  sol.x.assign(n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t b = t.basis()[r];
    if (b < n) sol.x[b] = std::max(0.0, t.rhs(r));
  }
  sol.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) sol.value += program.objective[j] * sol.x[j];
  return sol;
}

}  // namespace mixtraffic::lp
