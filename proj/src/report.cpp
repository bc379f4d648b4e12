#include "mixtraffic/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace mixtraffic::report {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string alpha_name(double a) { return "alpha=" + num(a); }

}  // namespace

std::string to_svg(const Chart& chart) {
  constexpr double W = 640, H = 420, L = 70, R = 170, T = 40, B = 55;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!(x1 > x0)) { x0 = std::isfinite(x0) ? x0 - 1 : 0; x1 = x0 + 2; }
  if (!(y1 > y0)) { y0 = std::isfinite(y0) ? y0 - 1 : 0; y1 = y0 + 2; }
  y0 = std::min(y0, 0.0);
  x0 = std::min(x0, 0.0);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(chart.title) +
         "</text>\n";
  svg += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    svg += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(H - B + 16) + "\" text-anchor=\"middle\">" + num(xv) +
           "</text>\n";
    svg += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) +
           "</text>\n";
  }
  svg += "<text x=\"" + num((L + W - R) / 2) + "\" y=\"" + num(H - 12) + "\" text-anchor=\"middle\">" +
         escape(chart.x_label) + "</text>\n";
  svg += "<text x=\"16\" y=\"" + num((T + H - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num((T + H - B) / 2) + ")\">" + escape(chart.y_label) + "</text>\n";

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const Series& s = chart.series[i];
    const char* color = kPalette[i % (sizeof kPalette / sizeof *kPalette)];
    if (s.markers) {
      for (const auto& [x, y] : s.points) {
        svg += "<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"4\" fill=\"" + color + "\"/>\n";
      }
    } else {
      std::string pts;
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(y)) continue;
        pts += num(px(x)) + "," + num(py(y)) + " ";
      }
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
             "\"/>\n";
    }
    const double ly = T + 16.0 * static_cast<double>(i);
    svg += "<rect x=\"" + num(W - R + 12) + "\" y=\"" + num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           color + "\"/>\n";
    svg += "<text x=\"" + num(W - R + 27) + "\" y=\"" + num(ly) + "\">" + escape(s.name) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string to_csv(const Chart& chart) {
  std::string out = "series,x,y\n";
  for (const auto& s : chart.series) {
    for (const auto& [x, y] : s.points) out += s.name + "," + num(x) + "," + num(y) + "\n";
  }
  return out;
}

Chart fundamental_diagram(const Road& road, const std::vector<double>& alphas, std::size_t points) {
  Chart c{"Fundamental diagram", "density (vehicles/distance)", "flow (vehicles/time)", {}};
  points = std::max<std::size_t>(points, 3);
  for (double a : alphas) {
    const double crit = critical_density(road, a);
    Series s{alpha_name(a), {}, false};
    for (std::size_t i = 0; i < points; ++i) {
      const double n = road.jam_density * static_cast<double>(i) / static_cast<double>(points - 1);
      const double f = n <= crit ? road.speed * n
                                 : road.speed * crit * (road.jam_density - n) / (road.jam_density - crit);
      s.points.emplace_back(n, f);
    }
    // Make sure the peak is on the curve.
    s.points.emplace_back(crit, road.speed * crit);
    std::sort(s.points.begin(), s.points.end());
    c.series.push_back(std::move(s));
  }
  return c;
}

Chart flow_latency(const Road& road, const std::vector<double>& alphas, std::size_t points) {
  Chart c{"Flow and latency", "flow (vehicles/time)", "latency (time)", {}};
  points = std::max<std::size_t>(points, 3);
  for (double a : alphas) {
    const double cap = max_flow(road, a);
    Series free{alpha_name(a) + " free", {}, false};
    Series jam{alpha_name(a) + " congested", {}, false};
    for (std::size_t i = 0; i < points; ++i) {
      const double f = cap * static_cast<double>(i) / static_cast<double>(points - 1);
      free.points.emplace_back(f, free_flow_latency(road));
      // Stop the congested branch at 5% of capacity; latency diverges at zero flow.
      const double g = cap * (0.05 + 0.95 * static_cast<double>(i) / static_cast<double>(points - 1));
      jam.points.emplace_back(g, latency(road, (1.0 - a) * g, a * g, true));
    }
    c.series.push_back(std::move(free));
    c.series.push_back(std::move(jam));
  }
  return c;
}

Chart equilibrium_diagram(const RoadNetwork& network, const EquilibriumResult& result, const std::string& title) {
  Chart c{title, "flow (vehicles/time)", "latency (time)", {}};
  Series ops{"operating points", {}, true};
  for (std::size_t i = 0; i < network.size(); ++i) {
    const Road& road = network[i];
    const double fh = result.routing.human[i];
    const double fa = result.routing.autonomous[i];
    const double a = autonomy_level(fh, fa);
    const double cap = max_flow(road, a);
    Series s{"road " + std::to_string(i + 1), {}, false};
    for (int j = 0; j <= 50; ++j) s.points.emplace_back(cap * j / 50.0, free_flow_latency(road));
    for (int j = 50; j >= 2; --j) {
      const double g = cap * j / 50.0;
      s.points.emplace_back(g, latency(road, (1.0 - a) * g, a * g, true));
    }
    c.series.push_back(std::move(s));
    ops.points.emplace_back(fh + fa, effective_latency(road, fh, fa, result.routing.congested[i]));
  }
  c.series.push_back(std::move(ops));
  return c;
}

std::string equilibrium_table(const RoadNetwork& network, const EquilibriumResult& result) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-5s %12s %12s %6s %12s %12s\n", "road", "human", "autonomous", "s",
                "latency", "capacity");
  out += line;
  for (std::size_t i = 0; i < network.size(); ++i) {
    const double fh = result.routing.human[i];
    const double fa = result.routing.autonomous[i];
    std::snprintf(line, sizeof line, "%-5zu %12.6g %12.6g %6d %12.6g %12.6g\n", i + 1, fh, fa,
                  result.routing.congested[i] ? 1 : 0,
                  effective_latency(network[i], fh, fa, result.routing.congested[i]),
                  max_flow(network[i], autonomy_level(fh, fa)));
    out += line;
  }
  std::snprintf(line, sizeof line, "m_eq=%zu m_all=%zu eq_latency=%.10g cost=%.10g\n", result.m_eq, result.m_all,
                result.eq_latency, result.cost);
  out += line;
  return out;
}

}  // namespace mixtraffic::report
