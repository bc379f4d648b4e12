#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

namespace tol {
/// Absolute slack on capacity comparisons.
inline constexpr double capacity_abs = 1e-9;
/// Relative slack on flow-conservation equalities.
inline constexpr double flow_rel = 1e-7;
/// Relative slack on latency equalities (equilibrium checks).
inline constexpr double latency_rel = 1e-6;
/// Absolute slack on flexibility volume comparisons.
inline constexpr double volume_abs = 1e-9;
}  // namespace tol

/// Physical parameters of one road. Units are abstract but must be consistent
/// (distance, time, vehicles).
struct Road {
  double length = 1.0;         // d
  double speed = 1.0;          // nominal speed
  double lanes = 1.0;          // b
  double headway_human = 0.04; // space per human-driven vehicle
  double headway_auto = 0.02;  // space per autonomous vehicle, <= headway_human
  double jam_density = 100.0;  // density at which flow stops

  bool operator==(const Road&) const = default;
};

/// Parallel roads ordered by strictly increasing free-flow latency.
///
/// The constructor does not validate so that tests can build degenerate
/// networks; use `RoadNetwork::checked` (or the JSON loader) for user input.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  explicit RoadNetwork(std::vector<Road> roads) : roads_(std::move(roads)) {}

  /// Builds a network and throws ValidationError listing every violation.
  static RoadNetwork checked(std::vector<Road> roads);

  std::size_t size() const noexcept { return roads_.size(); }
  const Road& operator[](std::size_t i) const { return roads_[i]; }
  std::span<const Road> roads() const noexcept { return roads_; }

  /// Free-flow latency of road i (0-based).
  double free_flow(std::size_t i) const;

  /// Free-flow latency of road i, or +infinity for i == size(). Handy for the
  /// half-open equilibrium latency interval [a_m, a_{m+1}).
  double free_flow_or_inf(std::size_t i) const;

  bool operator==(const RoadNetwork&) const = default;

 private:
  std::vector<Road> roads_;
};

/// Per-road flows plus the binary congestion profile.
struct Routing {
  std::vector<double> human;
  std::vector<double> autonomous;
  std::vector<bool> congested;

  Routing() = default;
  explicit Routing(std::size_t n) : human(n, 0.0), autonomous(n, 0.0), congested(n, false) {}

  std::size_t size() const noexcept { return human.size(); }
  double total(std::size_t i) const { return human[i] + autonomous[i]; }

  bool operator==(const Routing&) const = default;
};

struct DemandSpec {
  double human = 0.0;
  double autonomous = 0.0;
};

enum class DemandMode { inelastic, elastic };

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

double free_flow_latency(const Road& road);

/// Fraction of autonomous flow; 0 when the road is empty.
double autonomy_level(double human, double autonomous);

/// b / (alpha * h^a + (1 - alpha) * h^h). Throws DomainError unless alpha in [0,1].
double critical_density(const Road& road, double alpha);

/// Maximum flow at autonomy level alpha: speed * critical_density.
double max_flow(const Road& road, double alpha);

/// Fundamental diagram: flow carried at the given densities of each vehicle type.
double flow_from_density(const Road& road, double human_density, double auto_density);

/// Latency as a function of flow and congestion flag.
///
/// Free-flow roads always report d / v. Congested roads need a positive total
/// flow not exceeding the maximum flow at their autonomy level; the first case
/// throws DomainError, the second InfeasibleError.
double latency(const Road& road, double human, double autonomous, bool congested);

/// Latency used by equilibrium checks: an empty road is treated as free-flow.
double effective_latency(const Road& road, double human, double autonomous, bool congested);

/// Affine form of "congested latency equals target":
/// human * f_h + autonomous * f_a == rhs.
///
/// Obtained by multiplying the congested latency by the total flow and the
/// critical density; valid for target >= d / v, where both coefficients are
/// positive and the capacity bound holds automatically.
struct CongestionLine {
  double human = 0.0;
  double autonomous = 0.0;
  double rhs = 0.0;
};

CongestionLine congestion_line(const Road& road, double target_latency);

/// Whether human + autonomous fits under the maximum flow at its own autonomy level.
bool within_capacity(const Road& road, double human, double autonomous);

ValidationReport validate_network(const RoadNetwork& network);

bool is_feasible_routing(const RoadNetwork& network, const Routing& routing,
                         const DemandSpec& demand, DemandMode mode);

/// Sum over roads of flow times latency. Throws InfeasibleError when a road is
/// over capacity or a flow is negative.
double total_latency(const RoadNetwork& network, const Routing& routing);

/// Throws InfeasibleError unless every flow is nonnegative and every road is
/// within capacity; throws std::invalid_argument on dimension mismatch.
void require_capacity_feasible(const RoadNetwork& network, const Routing& routing);

}  // namespace mixtraffic
