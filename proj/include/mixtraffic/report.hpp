#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mixtraffic/equilibria.hpp"
#include "mixtraffic/network.hpp"

namespace mixtraffic::report {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  /// Drawn as markers instead of a line.
  bool markers = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

std::string to_svg(const Chart& chart);
/// Long format: series,x,y
std::string to_csv(const Chart& chart);

/// Flow against total density, one curve per autonomy level.
Chart fundamental_diagram(const Road& road, const std::vector<double>& alphas, std::size_t points = 101);

/// Latency against flow on both branches, one pair of curves per autonomy level.
Chart flow_latency(const Road& road, const std::vector<double>& alphas, std::size_t points = 101);

/// Flow-latency curve of each road at its equilibrium autonomy level with the
/// operating point marked.
Chart equilibrium_diagram(const RoadNetwork& network, const EquilibriumResult& result, const std::string& title);

/// Plain-text per-road table of an equilibrium.
std::string equilibrium_table(const RoadNetwork& network, const EquilibriumResult& result);

}  // namespace mixtraffic::report
