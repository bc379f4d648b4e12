#include "mixtraffic/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mixtraffic/lp.hpp"

namespace mixtraffic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_road_number(const RoadNetwork& network, std::size_t m) {
  if (m < 1 || m > network.size()) {
    throw std::out_of_range("road number " + std::to_string(m) + " outside [1, " +
                            std::to_string(network.size()) + "]");
  }
}

bool same_latency(double a, double b) {
  return std::abs(a - b) <= tol::latency_rel * std::max(std::abs(a), std::abs(b));
}

// LP over (f_h[0..m), f_a[0..m)) with the equilibrium-road structure at
// latency `eq`: roads before m congested at eq, road m free-flow or congested.
lp::Program eq_roads_program(const RoadNetwork& network, std::size_t m, double eq,
                             bool last_congested) {
  lp::Program prog;
  const std::size_t n = 2 * m;
  prog.objective.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Road& road = network[i];
    std::vector<double> row(n, 0.0);
    if (i + 1 < m || last_congested) {
      const CongestionLine line = congestion_line(road, eq);
      row[i] = line.human;
      row[m + i] = line.autonomous;
      prog.add(std::move(row), lp::Sense::equal, line.rhs);
    } else {
      // h_h f_h + h_a f_a <= v b is the maximum-flow bound written linearly.
      row[i] = road.headway_human;
      row[m + i] = road.headway_auto;
      prog.add(std::move(row), lp::Sense::less_equal, road.speed * road.lanes);
    }
  }
  return prog;
}

std::vector<double> ones_block(std::size_t n, std::size_t begin, std::size_t end) {
  std::vector<double> row(n, 0.0);
  for (std::size_t j = begin; j < end; ++j) row[j] = 1.0;
  return row;
}

}  // namespace

FlexibilityProfile::FlexibilityProfile(std::vector<FlexibilityLevel> levels)
    : levels_(std::move(levels)) {
  if (levels_.empty()) throw DataError("flexibility profile needs at least one level");
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    const auto& l = levels_[j];
    if (!(l.kappa >= 1.0)) throw DataError("flexibility kappa must be >= 1");
    if (!(l.phi >= 0.0 && l.phi <= 1.0)) throw DataError("flexibility phi must lie in [0, 1]");
    if (j > 0) {
      if (!(l.kappa > levels_[j - 1].kappa)) throw DataError("flexibility kappas must increase");
      if (l.phi < levels_[j - 1].phi) throw DataError("flexibility phis must not decrease");
    }
  }
  if (levels_.back().phi != 1.0) {
    throw DataError("the last flexibility level must carry phi = 1");
  }
}

FlexibilityProfile FlexibilityProfile::uniform(double kappa0) {
  return FlexibilityProfile({{kappa0, 1.0}});
}

FlexibilityProfile FlexibilityProfile::fully_flexible() { return FlexibilityProfile({{kInf, 1.0}}); }

double FlexibilityProfile::rejecting_fraction(double kappa) const {
  double phi = 0.0;
  for (const auto& level : levels_) {
    if (kappa > level.kappa) phi = level.phi;
  }
  return phi;
}

bool check_nash(const RoadNetwork& network, const Routing& routing) {
  require_capacity_feasible(network, routing);
  const std::size_t n = network.size();
  std::vector<double> lat(n);
  for (std::size_t i = 0; i < n; ++i) {
    lat[i] = effective_latency(network[i], routing.human[i], routing.autonomous[i], routing.congested[i]);
  }
  const double quickest = *std::min_element(lat.begin(), lat.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (routing.human[i] > 0.0 && !same_latency(lat[i], quickest) && lat[i] > quickest) return false;
  }
  return true;
}

std::optional<Routing> ne_feasible(const RoadNetwork& network, const DemandSpec& demand,
                                   std::size_t m_eq) {
  require_road_number(network, m_eq);
  const std::size_t m = m_eq;
  const double eq = network.free_flow(m - 1);
  lp::Program prog = eq_roads_program(network, m, eq, /*last_congested=*/false);
  prog.add(ones_block(2 * m, 0, m), lp::Sense::equal, demand.human);
  prog.add(ones_block(2 * m, m, 2 * m), lp::Sense::equal, demand.autonomous);
  const lp::Solution sol = lp::solve(prog);
  if (sol.status != lp::Status::optimal) return std::nullopt;

  Routing routing(network.size());
  for (std::size_t i = 0; i < m; ++i) {
    routing.human[i] = sol.x[i];
    routing.autonomous[i] = sol.x[m + i];
    routing.congested[i] = i + 1 < m;
  }
  return routing;
}

EquilibriumResult solve_bne(const RoadNetwork& network, const DemandSpec& demand) {
  for (std::size_t m = 1; m <= network.size(); ++m) {
    auto routing = ne_feasible(network, demand, m);
    if (!routing) continue;
    EquilibriumResult result;
    result.routing = std::move(*routing);
    result.m_eq = m;
    result.m_all = m;
    result.eq_latency = network.free_flow(m - 1);
    result.cost = total_latency(network, result.routing);
    return result;
  }
  throw InfeasibleError("demand exceeds the network capacity at every Nash equilibrium");
}

std::vector<double> critical_latency_candidates(const RoadNetwork& network, std::size_t m_eq,
                                                const FlexibilityProfile& profile) {
  require_road_number(network, m_eq);
  const double lo = network.free_flow(m_eq - 1);
  const double hi = network.free_flow_or_inf(m_eq);
  std::vector<double> out{lo};
  for (std::size_t i = m_eq; i < network.size(); ++i) {
    for (const auto& level : profile.levels()) {
      const double c = network.free_flow(i) / level.kappa;
      if (c > lo && c < hi) out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<EqRoadAllocation> max_autonomous_on_eq_roads(const RoadNetwork& network,
                                                           std::size_t m_eq, double eq_latency,
                                                           const DemandSpec& demand) {
  require_road_number(network, m_eq);
  const std::size_t m = m_eq;
  const double a_m = network.free_flow(m - 1);
  if (eq_latency < a_m * (1.0 - 1e-12) || !(eq_latency < network.free_flow_or_inf(m))) {
    throw DomainError("equilibrium latency outside [a_m, a_{m+1})");
  }

  std::optional<EqRoadAllocation> best;
  // Free-flow on road m only reaches latency a_m; congestion covers the rest.
  const bool free_possible = eq_latency <= a_m * (1.0 + 1e-12);
  for (bool last_congested : {false, true}) {
    if (!last_congested && !free_possible) continue;
    lp::Program prog = eq_roads_program(network, m, eq_latency, last_congested);
    prog.add(ones_block(2 * m, 0, m), lp::Sense::equal, demand.human);
    prog.add(ones_block(2 * m, m, 2 * m), lp::Sense::less_equal, demand.autonomous);
    prog.objective = ones_block(2 * m, m, 2 * m);
    const lp::Solution sol = lp::solve(prog);
    if (sol.status != lp::Status::optimal) continue;
    if (best && !(sol.value > best->autonomous_placed)) continue;
    EqRoadAllocation alloc;
    alloc.human.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(m));
    alloc.autonomous.assign(sol.x.begin() + static_cast<std::ptrdiff_t>(m), sol.x.end());
    alloc.last_congested = last_congested;
    alloc.autonomous_placed = std::min(sol.value, demand.autonomous);
    best = std::move(alloc);
  }
  return best;
}

OverflowPlacement longest_used_road(const RoadNetwork& network, std::size_t m_eq,
                                    double autonomous_placed, const DemandSpec& demand) {
  require_road_number(network, m_eq);
  const double slack = tol::flow_rel * std::max(1.0, demand.autonomous);
  OverflowPlacement out;
  out.autonomous.assign(network.size(), 0.0);
  double cumulative = autonomous_placed;
  for (std::size_t j = m_eq; j <= network.size(); ++j) {
    if (j > m_eq) {
      const double cap = max_flow(network[j - 1], 1.0);
      const double take = std::min(cap, std::max(0.0, demand.autonomous - cumulative));
      out.autonomous[j - 1] = take;
      cumulative += cap;
    }
    if (cumulative >= demand.autonomous - slack) {
      out.m_all = j;
      return out;
    }
  }
  throw InfeasibleError("autonomous demand exceeds the remaining network capacity");
}

bool check_fne(const RoadNetwork& network, const Routing& routing,
               const FlexibilityProfile& profile, double eq_latency) {
  require_capacity_feasible(network, routing);
  const std::size_t n = network.size();
  std::vector<double> lat(n);
  double auto_demand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lat[i] = effective_latency(network[i], routing.human[i], routing.autonomous[i], routing.congested[i]);
    auto_demand += routing.autonomous[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (lat[i] < eq_latency && !same_latency(lat[i], eq_latency)) return false;
    if (routing.human[i] > 0.0 && !same_latency(lat[i], eq_latency)) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (routing.total(i) <= 0.0) continue;
    double quicker = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (lat[j] < lat[i] && !same_latency(lat[j], lat[i])) quicker += routing.autonomous[j];
    }
    // A ratio equal to a level boundary (within the latency tolerance) counts as accepted.
    const double ratio = lat[i] / eq_latency / (1.0 + tol::latency_rel);
    const double required = profile.rejecting_fraction(ratio) * auto_demand;
    if (quicker < required - tol::volume_abs * std::max(1.0, auto_demand)) return false;
  }
  return true;
}

EquilibriumResult solve_bfne(const RoadNetwork& network, const DemandSpec& demand,
                             const FlexibilityProfile& profile) {
  std::optional<EquilibriumResult> best;
  for (std::size_t m = 1; m <= network.size(); ++m) {
    for (double eq : critical_latency_candidates(network, m, profile)) {
      auto alloc = max_autonomous_on_eq_roads(network, m, eq, demand);
      if (!alloc) continue;
      OverflowPlacement overflow;
      try {
        overflow = longest_used_road(network, m, alloc->autonomous_placed, demand);
      } catch (const InfeasibleError&) {
        continue;
      }
      Routing routing(network.size());
      for (std::size_t i = 0; i < m; ++i) {
        routing.human[i] = alloc->human[i];
        routing.autonomous[i] = alloc->autonomous[i];
        routing.congested[i] = i + 1 < m || alloc->last_congested;
      }
      for (std::size_t i = m; i < network.size(); ++i) routing.autonomous[i] = overflow.autonomous[i];

      if (!check_fne(network, routing, profile, eq)) continue;
      const double cost = total_latency(network, routing);
      // Strict improvement only: earlier (smaller m_eq, larger latency) wins ties.
      if (best && !(cost < best->cost * (1.0 - 1e-12) - 1e-15)) continue;
      EquilibriumResult res;
      res.routing = std::move(routing);
      res.m_eq = m;
      res.m_all = overflow.m_all;
      res.eq_latency = eq;
      res.cost = cost;
      best = std::move(res);
    }
  }
  if (!best) throw InfeasibleError("no flexible Nash equilibrium accommodates the demand");
  return *best;
}

}  // namespace mixtraffic
