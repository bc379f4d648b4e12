#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mixtraffic/network.hpp"

namespace mixtraffic {

/// One step of a flexibility profile: users who reject latencies above
/// `kappa` times the equilibrium latency make up a fraction `phi` of the
/// autonomous demand.
struct FlexibilityLevel {
  double kappa = 1.0;
  double phi = 1.0;

  bool operator==(const FlexibilityLevel&) const = default;
};

/// Nondecreasing step function phi(kappa): the fraction of autonomous users
/// that refuse a route whose latency is kappa times the quickest one.
///
///   phi(kappa) = 0                 for kappa <= kappa_0
///              = phi_j             for kappa_j < kappa <= kappa_{j+1}
///              = 1                 for kappa >  kappa_last
///
/// The value attached to the last level is therefore always 1; the
/// constructor rejects anything else. Kappas may be +infinity (used by
/// `fully_flexible`).
class FlexibilityProfile {
 public:
  explicit FlexibilityProfile(std::vector<FlexibilityLevel> levels);

  /// Every user tolerates up to kappa0 times the quickest latency.
  static FlexibilityProfile uniform(double kappa0);
  /// Nobody ever refuses: phi is identically zero.
  static FlexibilityProfile fully_flexible();

  double rejecting_fraction(double kappa) const;
  std::span<const FlexibilityLevel> levels() const noexcept { return levels_; }

  bool operator==(const FlexibilityProfile&) const = default;

 private:
  std::vector<FlexibilityLevel> levels_;
};

/// Road numbers m_eq and m_all are 1-based, matching the road labels used in
/// reports; routing vectors stay 0-based.
struct EquilibriumResult {
  Routing routing;
  std::size_t m_eq = 1;
  std::size_t m_all = 1;
  double eq_latency = 0.0;
  double cost = 0.0;

  bool operator==(const EquilibriumResult&) const = default;
};

/// Nash condition for human drivers: every road carrying human flow has a
/// latency no greater than any other road (relative tolerance 1e-6). Empty
/// roads count at their free-flow latency.
bool check_nash(const RoadNetwork& network, const Routing& routing);

/// A routing in NE(demand, m_eq) with roads before m_eq congested at a_{m_eq},
/// road m_eq in free-flow and later roads empty, or nullopt when none exists.
std::optional<Routing> ne_feasible(const RoadNetwork& network, const DemandSpec& demand,
                                   std::size_t m_eq);

/// Best-case Nash equilibrium: the first m_eq for which ne_feasible succeeds.
/// Throws InfeasibleError when the demand fits at no equilibrium.
EquilibriumResult solve_bne(const RoadNetwork& network, const DemandSpec& demand);

/// Equilibrium latencies worth trying for a given m_eq, in descending order:
/// a_{m_eq} together with every a_i / kappa_j (i > m_eq) strictly inside
/// (a_{m_eq}, a_{m_eq + 1}).
std::vector<double> critical_latency_candidates(const RoadNetwork& network, std::size_t m_eq,
                                                const FlexibilityProfile& profile);

/// Flows on roads [m_eq] that carry all human demand at the common latency
/// `eq_latency` while fitting as much autonomous flow as possible.
struct EqRoadAllocation {
  std::vector<double> human;       // length m_eq
  std::vector<double> autonomous;  // length m_eq
  bool last_congested = false;     // regime of road m_eq
  double autonomous_placed = 0.0;
};

std::optional<EqRoadAllocation> max_autonomous_on_eq_roads(const RoadNetwork& network,
                                                           std::size_t m_eq, double eq_latency,
                                                           const DemandSpec& demand);

/// Placement of the autonomous flow left over after the equilibrium roads:
/// roads m_eq+1 .. m_all-1 run all-autonomous at maximum flow and the
/// remainder goes on m_all.
struct OverflowPlacement {
  std::size_t m_all = 1;
  std::vector<double> autonomous;  // full length N, zero on roads [m_eq]
};

OverflowPlacement longest_used_road(const RoadNetwork& network, std::size_t m_eq,
                                    double autonomous_placed, const DemandSpec& demand);

/// Flexible Nash equilibrium check.
///
/// (1) roads with human flow sit at `eq_latency` and no road is quicker;
/// (2) for every used road with latency l, the autonomous volume on strictly
///     quicker roads is at least phi(l / eq_latency) times the autonomous
///     demand. Checking just below each road latency is equivalent to checking
///     all l >= 0 because phi is left-continuous.
bool check_fne(const RoadNetwork& network, const Routing& routing,
               const FlexibilityProfile& profile, double eq_latency);

/// Best-case flexible Nash equilibrium by enumeration over m_eq and the
/// critical equilibrium latencies. Throws InfeasibleError if nothing passes.
EquilibriumResult solve_bfne(const RoadNetwork& network, const DemandSpec& demand,
                             const FlexibilityProfile& profile);

}  // namespace mixtraffic
