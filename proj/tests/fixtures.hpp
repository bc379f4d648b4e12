#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "mixtraffic/network.hpp"
#include "mixtraffic/pricing.hpp"

namespace fixture {

using namespace mixtraffic;

/// d=1, v=1, b=1, h^h=0.04, h^a=0.02, nbar=100: capacity 25 humans / 50 autonomous.
inline Road unit_road() { return Road{1.0, 1.0, 1.0, 0.04, 0.02, 100.0}; }

inline Road road(double d, double v, double b, double nbar = 100.0, double hh = 0.04, double ha = 0.02) {
  return Road{d, v, b, hh, ha, nbar};
}

/// Two roads with capacities 25/50 and free-flow latencies 1 and 2.
inline RoadNetwork desk_network() { return RoadNetwork({road(1, 1, 1, 100), road(2, 1, 2, 200)}); }

inline RoadNetwork desk_network3() {
  return RoadNetwork({road(1, 1, 1, 100), road(2, 1, 2, 200), road(3, 1, 2, 200)});
}

inline PopulationSamples two_atoms() {
  return PopulationSamples{{UserParams{1.0, 0.5, 0.4}, UserParams{0.3, 1.0, 0.2}}};
}

inline PricingProblem desk_problem() {
  PricingProblem p;
  p.network = desk_network();
  p.lambda_h = 10.0;
  p.lambda_a = 20.0;
  p.theta = 0.05;
  p.profit_floor = 0.0;
  p.fuel_cost = 0.0;
  p.alt_latency = 4.0;
  p.population = two_atoms();
  return p;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("mixtraffic-" + tag + "-" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
