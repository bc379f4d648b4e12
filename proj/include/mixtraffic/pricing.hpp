#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixtraffic/choice.hpp"
#include "mixtraffic/network.hpp"

namespace mixtraffic {

struct PricingProblem {
  RoadNetwork network;
  double lambda_h = 0.0;
  /// Ceiling of the elastic autonomous-service demand.
  double lambda_a = 0.0;
  double theta = 0.0;
  double profit_floor = 0.0;
  /// Money per unit distance.
  double fuel_cost = 0.0;
  double alt_latency = 1.0;
  PopulationSamples population;
  /// Autonomous flow routed selfishly, outside the planner's control.
  std::optional<double> uncontrolled_lambda_b;
};

struct PricingDiagnostics {
  std::size_t restarts = 0;
  /// Restarts whose final point passed the residual check.
  std::size_t accepted_restarts = 0;
  std::size_t best_restart = 0;
  /// Max normalized residual of the returned candidate.
  double max_residual = 0.0;
  std::size_t inner_iterations = 0;

  bool operator==(const PricingDiagnostics&) const = default;
};

struct PricingSolution {
  Routing routing;
  std::vector<double> prices;
  /// Longest road carrying human flow, 1-based.
  std::size_t k = 1;
  double objective = 0.0;
  /// Expected fractions over options 0 (decline) .. N.
  std::vector<double> q;
  double profit = 0.0;
  std::optional<std::vector<double>> f_b;
  PricingDiagnostics diagnostics;

  bool operator==(const PricingSolution&) const = default;
};

struct PricingConfig {
  std::size_t restarts = 100;
  std::uint64_t seed = 0;
  double constraint_tolerance = 1e-6;
  double optimality_tolerance = 1e-6;
  /// Inner quasi-Newton iterations allowed per restart.
  int max_iterations = 500;
  /// Re-solves allowed when the dominated set moves during a restart.
  int max_resolves = 5;
  /// Candidates above this normalized residual are discarded.
  double acceptance_tolerance = 1e-4;
};

/// Average latency of the carried flow minus theta times the carried flow.
/// Throws DomainError when no flow is carried.
double social_objective(const RoadNetwork& network, const Routing& routing, double theta);

struct Residual {
  std::string id;      // e.g. "human_demand", "capacity[2]" (1-based road)
  double value = 0.0;  // signed; equalities want 0, inequalities want >= 0
  bool equality = true;
  double scale = 1.0;

  /// Violation relative to the scale: |value| for equalities, max(0, -value)
  /// for inequalities, divided by max(scale, 1).
  double normalized() const;
};

struct ResidualReport {
  std::vector<Residual> residuals;

  double max_normalized() const;
  const Residual* find(const std::string& id) const;
};

/// Signed residuals of every planning constraint at the candidate, with q
/// recomputed from the candidate's latencies and prices.
ResidualReport evaluate_constraints(const PricingProblem& problem, const PricingSolution& candidate);

struct StructureClause {
  std::string name;  // free_flow_road | equal_latency | no_human_beyond_k
  bool pass = false;
  std::string detail;
};

struct StructureReport {
  std::vector<StructureClause> clauses;
  bool pass() const;
};

/// Checks that road k runs at free flow, roads 1..k share its latency
/// (relative tolerance 1e-4) and no human flow sits beyond k.
StructureReport verify_structure(const PricingProblem& problem, const PricingSolution& solution);

/// Multistart local solve of the pricing problem over every road k and
/// admissible congestion flag of road k. Throws InfeasibleError when no
/// restart reaches a feasible point.
PricingSolution solve_pricing(const PricingProblem& problem, const PricingConfig& config = {});

/// Same search with selfish uncontrolled autonomous flow f_b on roads 1..k.
/// Requires problem.uncontrolled_lambda_b.
PricingSolution solve_pricing_partial_control(const PricingProblem& problem,
                                              const PricingConfig& config = {});

/// Humans at their best Nash equilibrium and no autonomous service; nullopt
/// when the humans alone do not fit.
std::optional<PricingSolution> all_decline_baseline(const PricingProblem& problem);

/// Upper end of the random initial price range.
double price_ceiling(const PricingProblem& problem);

}  // namespace mixtraffic
