#include <doctest.h>

#include <cmath>
#include <limits>

#include "mixtraffic/lp.hpp"
#include "oracles.hpp"

using namespace mixtraffic;
using lp::Sense;

namespace {

// Best vertex of {x >= 0, A x <= b} in two variables, by enumerating every
// pair of tight constraints.
std::optional<double> vertex_max(const std::vector<std::array<double, 3>>& rows, std::array<double, 2> c) {
  std::vector<std::array<double, 3>> all = rows;
  all.push_back({-1.0, 0.0, 0.0});
  all.push_back({0.0, -1.0, 0.0});
  std::optional<double> best;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      const double det = all[i][0] * all[j][1] - all[i][1] * all[j][0];
      if (std::abs(det) < 1e-12) continue;
      const double x = (all[i][2] * all[j][1] - all[i][1] * all[j][2]) / det;
      const double y = (all[i][0] * all[j][2] - all[i][2] * all[j][0]) / det;
      bool ok = true;
      for (const auto& r : all) ok = ok && r[0] * x + r[1] * y <= r[2] + 1e-9;
      if (ok) {
        const double v = c[0] * x + c[1] * y;
        if (!best || v > *best) best = v;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("textbook program") {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  36 at (2, 6)
  lp::Program p;
  p.objective = {3, 5};
  p.add({1, 0}, Sense::less_equal, 4);
  p.add({0, 2}, Sense::less_equal, 12);
  p.add({3, 2}, Sense::less_equal, 18);
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(s.value == doctest::Approx(36.0));
  CHECK(s.x[0] == doctest::Approx(2.0));
  CHECK(s.x[1] == doctest::Approx(6.0));
}

TEST_CASE("equalities and lower bounds") {
  // max -x - y, x + y = 3, x >= 1, y >= 0.5
  lp::Program p;
  p.objective = {-1, -1};
  p.add({1, 1}, Sense::equal, 3);
  p.add({1, 0}, Sense::greater_equal, 1);
  p.add({0, 1}, Sense::greater_equal, 0.5);
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(s.value == doctest::Approx(-3.0));
  CHECK(s.x[0] + s.x[1] == doctest::Approx(3.0));
}

TEST_CASE("negative right-hand sides") {
  // -x <= -2 means x >= 2.
  lp::Program p;
  p.objective = {-1};
  p.add({-1}, Sense::less_equal, -2);
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(s.x[0] == doctest::Approx(2.0));
}

TEST_CASE("infeasible and unbounded") {
  lp::Program inf;
  inf.objective = {1};
  inf.add({1}, Sense::less_equal, 1);
  inf.add({1}, Sense::greater_equal, 2);
  CHECK(lp::solve(inf).status == lp::Status::infeasible);

  lp::Program unb;
  unb.objective = {1, 0};
  unb.add({0, 1}, Sense::less_equal, 1);
  CHECK(lp::solve(unb).status == lp::Status::unbounded);
}

TEST_CASE("degenerate program terminates") {
  // Beale's cycling example; Bland's rule must terminate at 1/20.
  lp::Program p;
  p.objective = {0.75, -150, 0.02, -6};
  p.add({0.25, -60, -0.04, 9}, Sense::less_equal, 0);
  p.add({0.5, -90, -0.02, 3}, Sense::less_equal, 0);
  p.add({0, 0, 1, 0}, Sense::less_equal, 1);
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(s.value == doctest::Approx(0.05));
}

TEST_CASE("random two-variable programs match vertex enumeration") {
  oracle::Gen g(2024);
  for (int n = 0; n < 300; ++n) {
    std::vector<std::array<double, 3>> rows;
    lp::Program p;
    p.objective = {g.uniform(-1, 2), g.uniform(-1, 2)};
    const int m = g.integer(1, 5);
    for (int i = 0; i < m; ++i) {
      std::array<double, 3> r{g.uniform(-1, 3), g.uniform(-1, 3), g.uniform(-1, 5)};
      rows.push_back(r);
      p.add({r[0], r[1]}, Sense::less_equal, r[2]);
    }
    // Box keeps the programs bounded.
    rows.push_back({1, 0, 10});
    rows.push_back({0, 1, 10});
    p.add({1, 0}, Sense::less_equal, 10);
    p.add({0, 1}, Sense::less_equal, 10);
    const auto expect = vertex_max(rows, {p.objective[0], p.objective[1]});
    const auto s = lp::solve(p);
    if (!expect) {
      CHECK(s.status == lp::Status::infeasible);
    } else {
      REQUIRE(s.status == lp::Status::optimal);
      CHECK(s.value == doctest::Approx(*expect).epsilon(1e-9));
    }
  }
}
