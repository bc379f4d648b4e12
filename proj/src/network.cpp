#include "mixtraffic/network.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mixtraffic {

namespace {

void require_same_size(const RoadNetwork& network, const Routing& routing) {
  const auto n = network.size();
  if (routing.human.size() != n || routing.autonomous.size() != n || routing.congested.size() != n) {
    throw std::invalid_argument("routing dimensions do not match the network");
  }
}

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

RoadNetwork RoadNetwork::checked(std::vector<Road> roads) {
  RoadNetwork net(std::move(roads));
  auto report = validate_network(net);
  if (!report.ok()) {
    const std::string what = "invalid road network (" + std::to_string(report.violations.size()) +
                             " violation(s)): " + report.violations.front().message;
    throw ValidationError(what, std::move(report.violations));
  }
  return net;
}

double RoadNetwork::free_flow(std::size_t i) const { return free_flow_latency(roads_.at(i)); }

double RoadNetwork::free_flow_or_inf(std::size_t i) const {
  if (i >= roads_.size()) return std::numeric_limits<double>::infinity();
  return free_flow(i);
}

double free_flow_latency(const Road& road) { return road.length / road.speed; }

double autonomy_level(double human, double autonomous) {
  const double total = human + autonomous;
  return total > 0.0 ? autonomous / total : 0.0;
}

double critical_density(const Road& road, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("autonomy level must lie in [0, 1]");
  }
  return road.lanes / (alpha * road.headway_auto + (1.0 - alpha) * road.headway_human);
}

double max_flow(const Road& road, double alpha) { return road.speed * critical_density(road, alpha); }

double flow_from_density(const Road& road, double human_density, double auto_density) {
  const double n = human_density + auto_density;
  const double critical = critical_density(road, autonomy_level(human_density, auto_density));
  if (n <= critical) return road.speed * n;
  if (n <= road.jam_density) {
    return road.speed * critical * (road.jam_density - n) / (road.jam_density - critical);
  }
  return 0.0;
}

CongestionLine congestion_line(const Road& road, double target_latency) {
  const double base = target_latency / road.length - 1.0 / road.speed;
  const double packing = road.jam_density / (road.speed * road.lanes);
  return {base + packing * road.headway_human, base + packing * road.headway_auto, road.jam_density};
}

bool within_capacity(const Road& road, double human, double autonomous) {
  const double total = human + autonomous;
  return total <= max_flow(road, autonomy_level(human, autonomous)) + tol::capacity_abs;
}

double latency(const Road& road, double human, double autonomous, bool congested) {
  if (!congested) return free_flow_latency(road);
  const double total = human + autonomous;
  if (!(total > 0.0)) {
    throw DomainError("congested latency is undefined at zero flow");
  }
  const double alpha = autonomy_level(human, autonomous);
  const double critical = critical_density(road, alpha);
  if (total > road.speed * critical + tol::capacity_abs) {
    throw InfeasibleError("flow exceeds the maximum flow of a congested road");
  }
  return road.length *
         (road.jam_density / total + (critical - road.jam_density) / (road.speed * critical));
}

double effective_latency(const Road& road, double human, double autonomous, bool congested) {
  if (human + autonomous <= 0.0) return free_flow_latency(road);
  return latency(road, human, autonomous, congested);
}

ValidationReport validate_network(const RoadNetwork& network) {
  ValidationReport report;
  auto add = [&](std::size_t i, const char* kind, const std::string& msg) {
    report.violations.push_back({i, kind, "road " + std::to_string(i + 1) + ": " + msg});
  };
  for (std::size_t i = 0; i < network.size(); ++i) {
    const Road& r = network[i];
    const double fields[] = {r.length, r.speed, r.lanes, r.headway_human, r.headway_auto, r.jam_density};
    bool positive = true;
    for (double f : fields) positive = positive && std::isfinite(f) && f > 0.0;
    if (!positive) {
      add(i, "nonpositive", "all parameters must be finite and strictly positive");
      continue;
    }
    if (r.headway_auto > r.headway_human) {
      add(i, "headway", "autonomous headway exceeds human headway");
    }
    if (!(r.jam_density > r.lanes / r.headway_auto)) {
      add(i, "jam_density", "jam density must exceed the all-autonomous critical density");
    }
  }
  for (std::size_t i = 1; i < network.size(); ++i) {
    const Road& prev = network[i - 1];
    const Road& cur = network[i];
    if (prev.speed > 0 && cur.speed > 0 && !(free_flow_latency(prev) < free_flow_latency(cur))) {
      std::ostringstream msg;
      msg << "free-flow latency " << free_flow_latency(cur)
          << " does not exceed that of the previous road (" << free_flow_latency(prev) << ")";
      add(i, "ordering", msg.str());
    }
  }
  return report;
}

void require_capacity_feasible(const RoadNetwork& network, const Routing& routing) {
  require_same_size(network, routing);
  for (std::size_t i = 0; i < network.size(); ++i) {
    const double h = routing.human[i];
    const double a = routing.autonomous[i];
    if (!(h >= 0.0) || !(a >= 0.0)) {
      throw InfeasibleError("negative flow on road " + std::to_string(i + 1));
    }
    if (!within_capacity(network[i], h, a)) {
      throw InfeasibleError("road " + std::to_string(i + 1) + " exceeds its maximum flow");
    }
  }
}

bool is_feasible_routing(const RoadNetwork& network, const Routing& routing,
                         const DemandSpec& demand, DemandMode mode) {
  require_same_size(network, routing);
  double human_sum = 0.0;
  double auto_sum = 0.0;
  for (std::size_t i = 0; i < network.size(); ++i) {
    const double h = routing.human[i];
    const double a = routing.autonomous[i];
    if (!(h >= 0.0) || !(a >= 0.0)) return false;
    if (!within_capacity(network[i], h, a)) return false;
    human_sum += h;
    auto_sum += a;
  }
  if (!close_rel(human_sum, demand.human, tol::flow_rel)) return false;
  if (mode == DemandMode::inelastic) return close_rel(auto_sum, demand.autonomous, tol::flow_rel);
  return auto_sum <= demand.autonomous + tol::flow_rel * std::max(1.0, demand.autonomous);
}

double total_latency(const RoadNetwork& network, const Routing& routing) {
  require_capacity_feasible(network, routing);
  double cost = 0.0;
  for (std::size_t i = 0; i < network.size(); ++i) {
    const double f = routing.total(i);
    if (f <= 0.0) continue;
    cost += f * latency(network[i], routing.human[i], routing.autonomous[i], routing.congested[i]);
  }
  return cost;
}

}  // namespace mixtraffic
