#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mixtraffic/equilibria.hpp"
#include "mixtraffic/errors.hpp"
#include "mixtraffic/pricing.hpp"
#include "oracles.hpp"

using namespace mixtraffic;
using fixture::road;

namespace {

PricingSolution from_oracle(const PricingProblem& p, const oracle::PricingPoint& pt) {
  PricingSolution s;
  s.k = pt.k;
  s.routing = Routing(2);
  for (std::size_t i = 0; i < 2; ++i) {
    s.routing.human[i] = pt.fh[i];
    s.routing.autonomous[i] = pt.fa[i];
    s.prices.push_back(pt.price[i]);
  }
  s.routing.congested = {pt.k == 2 || pt.last_congested, pt.k == 2 && pt.last_congested};
  s.objective = social_objective(p.network, s.routing, p.theta);
  return s;
}

double throughput(const PricingSolution& s) {
  double g = 0.0;
  for (std::size_t i = 0; i < s.routing.size(); ++i) g += s.routing.total(i);
  return g;
}

PricingProblem random_two_road(oracle::Gen& g) {
  PricingProblem p;
  const double b1 = g.integer(1, 2), b2 = g.integer(1, 3);
  const Road r1 = road(g.uniform(0.5, 2), 1, b1, 120 * b1);
  const Road r2 = road(r1.length * g.uniform(1.2, 2.5), 1, b2, 120 * b2);
  p.network = RoadNetwork({r1, r2});
  p.lambda_h = g.uniform(0, 0.8) * max_flow(r1, 0.0);
  p.lambda_a = g.uniform(5, 40);
  p.theta = g.uniform(0, 0.1);
  p.alt_latency = g.uniform(1.5, 5);
  for (int i = 0; i < 2; ++i) p.population.samples.push_back({g.uniform(0.2, 1.5), g.uniform(0.3, 1.5), g.uniform(0, 0.5)});
  return p;
}

}  // namespace

TEST_CASE("social objective") {
  const RoadNetwork one({fixture::unit_road()});
  Routing r(1);
  r.human = {10.0};
  CHECK(social_objective(one, r, 0.0) == doctest::Approx(1.0));
  CHECK(social_objective(one, r, 0.1) == doctest::Approx(0.0));
  r.human = {20.0};
  r.congested = {true};
  CHECK(social_objective(one, r, 0.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(social_objective(one, Routing(1), 0.0), DomainError);
}

TEST_CASE("constraint residuals") {
  PricingProblem p = fixture::desk_problem();
  PricingSolution c;
  c.k = 1;
  c.routing = Routing(2);
  c.routing.human = {9.0, 0.0};
  c.prices = {0.0, 0.0};
  auto rep = evaluate_constraints(p, c);
  REQUIRE(rep.find("human_demand"));
  CHECK(rep.find("human_demand")->value == doctest::Approx(-1.0));
  CHECK(rep.find("human_demand")->normalized() == doctest::Approx(0.1));

  p.profit_floor = 1.0;
  c.routing.human = {10.0, 0.0};
  rep = evaluate_constraints(p, c);
  CHECK(rep.find("profit")->value == doctest::Approx(-1.0));
  CHECK(rep.find("human_demand")->value == doctest::Approx(0.0));
  CHECK(rep.find("eq_latency_high"));
  CHECK(rep.find("capacity[2]"));
  CHECK_FALSE(rep.find("equal_latency[1]"));

  c.k = 3;
  CHECK_THROWS_AS(evaluate_constraints(p, c), std::out_of_range);
}

TEST_CASE("desk problem matches the two-road oracle") {
  const PricingProblem p = fixture::desk_problem();
  const auto s = solve_pricing(p);
  const auto ref = oracle::TwoRoadPricingOracle(p).solve();
  REQUIRE(std::isfinite(ref.objective));
  CHECK(std::abs(s.objective - ref.objective) <= 0.01 * std::abs(ref.objective));
  CHECK(s.k == ref.k);
  CHECK(verify_structure(p, s).pass());
  CHECK(evaluate_constraints(p, s).max_normalized() < 1e-4);
  CHECK(s.diagnostics.max_residual < 1e-4);
  CHECK(s.diagnostics.accepted_restarts > 0);
  CHECK(s.q.size() == 3);
  CHECK(s.profit >= -1e-9);
  CHECK(price_ceiling(p) == doctest::Approx(oracle::TwoRoadPricingOracle(p).price_ceiling()));

  // The oracle's own optimum satisfies the planning constraints.
  const auto built = from_oracle(p, ref);
  CHECK(verify_structure(p, built).pass());
  CHECK(evaluate_constraints(p, built).max_normalized() < 1e-3);
}

TEST_CASE("structure violations are reported") {
  const PricingProblem p = fixture::desk_problem();
  PricingSolution s;
  s.k = 1;
  s.routing = Routing(2);
  s.prices = {0.0, 0.0};
  s.routing.human = {20.0, 0.0};
  s.routing.congested = {true, false};
  auto rep = verify_structure(p, s);
  CHECK_FALSE(rep.pass());
  CHECK_FALSE(rep.clauses[0].pass);
  CHECK(rep.clauses[0].name == "free_flow_road");

  s.routing.human = {10.0, 5.0};
  s.routing.congested = {false, false};
  rep = verify_structure(p, s);
  CHECK(rep.clauses[0].pass);
  CHECK_FALSE(rep.clauses[2].pass);

  s.k = 2;
  s.routing.human = {10.0, 5.0};
  s.routing.congested = {true, false};
  rep = verify_structure(p, s);
  CHECK_FALSE(rep.clauses[1].pass);
  CHECK(rep.clauses[1].name == "equal_latency");
}

TEST_CASE("single saturated road") {
  PricingProblem p = fixture::desk_problem();
  p.network = RoadNetwork({fixture::unit_road()});
  p.lambda_h = 24.9;
  p.theta = 0.0;
  const auto s = solve_pricing(p);
  CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.routing.autonomous[0] <= 0.2 + 1e-6);
  CHECK(verify_structure(p, s).pass());
}

TEST_CASE("large theta maximizes throughput") {
  PricingProblem p = fixture::desk_problem();
  p.theta = 100.0;
  const auto s = solve_pricing(p);
  oracle::PricingOracleConfig cfg;
  cfg.maximize_throughput = true;
  const auto ref = oracle::TwoRoadPricingOracle(p, cfg).solve();
  CHECK(throughput(s) >= 0.99 * ref.throughput);
}

TEST_CASE("random two-road instances match the oracle") {
  oracle::Gen g(77);
  for (int n = 0; n < 10; ++n) {
    const PricingProblem p = random_two_road(g);
    CAPTURE(n);
    const auto ref = oracle::TwoRoadPricingOracle(p).solve();
    if (!std::isfinite(ref.objective)) continue;
    const auto s = solve_pricing(p);
    CHECK(s.objective <= ref.objective + 0.01 * std::abs(ref.objective) + 1e-9);
    CHECK(s.objective >= ref.objective - 0.01 * std::abs(ref.objective) - 1e-9);
    CHECK(verify_structure(p, s).pass());
  }
}

TEST_CASE("infeasible and invalid problems") {
  PricingProblem p = fixture::desk_problem();
  p.lambda_h = 200.0;
  CHECK_THROWS_AS(solve_pricing(p), InfeasibleError);
  CHECK_FALSE(all_decline_baseline(p));

  PricingProblem empty = fixture::desk_problem();
  empty.population.samples.clear();
  CHECK_THROWS_AS(solve_pricing(empty), DataError);

  PricingProblem neg = fixture::desk_problem();
  neg.theta = -1.0;
  CHECK_THROWS_AS(solve_pricing(neg), DataError);

  CHECK_THROWS_AS(solve_pricing_partial_control(fixture::desk_problem()), DataError);
}

TEST_CASE("baselines") {
  const PricingProblem p = fixture::desk_problem();
  const auto base = all_decline_baseline(p);
  REQUIRE(base);
  CHECK(base->objective == doctest::Approx(0.5));
  CHECK(base->q[0] == 1.0);
  CHECK(solve_pricing(p).objective <= base->objective);

  PricingProblem none = p;
  none.lambda_h = 0.0;
  CHECK_FALSE(all_decline_baseline(none));
}

TEST_CASE("determinism and restarts") {
  const PricingProblem p = fixture::desk_problem();
  PricingConfig cfg;
  cfg.restarts = 10;
  cfg.seed = 3;
  CHECK(solve_pricing(p, cfg) == solve_pricing(p, cfg));
  PricingConfig few = cfg;
  few.restarts = 2;
  CHECK(solve_pricing(p, cfg).objective <= solve_pricing(p, few).objective);
}

TEST_CASE("partial control") {
  const PricingProblem p = fixture::desk_problem();
  const auto plain = solve_pricing(p);

  PricingProblem zero = p;
  zero.uncontrolled_lambda_b = 0.0;
  const auto z = solve_pricing_partial_control(zero);
  CHECK(std::abs(z.objective - plain.objective) < 1e-4);
  REQUIRE(z.f_b);
  for (double v : *z.f_b) CHECK(std::abs(v) < 1e-6);

  // Nothing controlled: humans and uncontrolled autonomous flow settle in a
  // best Nash equilibrium; the objective counts the human flow only.
  PricingProblem all = p;
  all.lambda_a = 0.0;
  all.uncontrolled_lambda_b = 20.0;
  const auto u = solve_pricing_partial_control(all);
  const auto eq = solve_bne(p.network, {p.lambda_h, 20.0});
  CHECK(u.objective == doctest::Approx(eq.eq_latency - p.theta * p.lambda_h).epsilon(1e-5));
  REQUIRE(u.f_b);
  CHECK((*u.f_b)[0] + (*u.f_b)[1] == doctest::Approx(20.0).epsilon(1e-6));

  PricingProblem half = p;
  half.lambda_a = 10.0;
  half.uncontrolled_lambda_b = 10.0;
  const auto h = solve_pricing_partial_control(half);
  CHECK(evaluate_constraints(half, h).max_normalized() < 1e-4);
  CHECK(verify_structure(half, h).pass());
  CHECK(h.objective >= plain.objective - 1e-6);
  CHECK(h.objective <= u.objective + 1e-6);
}
