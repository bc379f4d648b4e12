#include "mixtraffic/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mixtraffic/equilibria.hpp"
#include "mixtraffic/errors.hpp"
#include "mixtraffic/optim.hpp"

namespace mixtraffic {

namespace {

using optim::Matrix;
using optim::Vector;

constexpr double kInf = std::numeric_limits<double>::infinity();

double positive_or_one(double v) { return v > 0.0 ? v : 1.0; }

// Congested latency without the capacity guard of `latency`; solver iterates
// may overshoot capacity by the constraint tolerance.
double road_latency(const Road& road, double human, double autonomous, bool congested) {
  const double total = human + autonomous;
  if (!congested || !(total > 0.0)) return free_flow_latency(road);
  const double critical = critical_density(road, autonomy_level(human, autonomous));
  return road.length *
         (road.jam_density / total + (critical - road.jam_density) / (road.speed * critical));
}

struct Layout {
  std::size_t n = 0;
  std::size_t k = 0;  // number of roads that may carry humans
  bool congested = false;
  bool partial = false;
  Eigen::Index fh = 0, fa = 0, fb = 0, p = 0, lat = -1, size = 0;
};

Layout make_layout(std::size_t n, std::size_t k, bool congested, bool partial) {
  Layout l;
  l.n = n;
  l.k = k;
  l.congested = congested;
  l.partial = partial;
  Eigen::Index at = 0;
  l.fh = at;
  at += static_cast<Eigen::Index>(k);
  l.fa = at;
  at += static_cast<Eigen::Index>(n);
  l.fb = at;
  if (partial) at += static_cast<Eigen::Index>(k);
  l.p = at;
  at += static_cast<Eigen::Index>(n);
  if (congested) l.lat = at++;
  l.size = at;
  return l;
}

// One (k, flag of road k) branch of the planning problem in scaled variables:
// flows divided by their demand, prices by the price ceiling, the common
// latency of roads 1..k by a_k.
class Branch {
 public:
  Branch(const PricingProblem& problem, std::size_t k, bool congested, bool partial, double p_max)
      : pb_(problem),
        lay_(make_layout(problem.network.size(), k, congested, partial)),
        sh_(positive_or_one(problem.lambda_h)),
        sa_(positive_or_one(problem.lambda_a)),
        sb_(positive_or_one(problem.uncontrolled_lambda_b.value_or(0.0))),
        sp_(p_max),
        ak_(problem.network.free_flow(k - 1)) {
    const std::size_t n = lay_.n;
    lat_hi_ = k < n ? problem.network.free_flow(k) : 10.0 * ak_;
    for (std::size_t i = 0; i < n; ++i) {
      const Road& r = problem.network[i];
      capacity_.push_back(r.speed * r.lanes);
    }
  }

  const Layout& layout() const { return lay_; }

  double common_latency(const Vector& z) const { return lay_.congested ? z[lay_.lat] * ak_ : ak_; }
  double fh(const Vector& z, std::size_t i) const {
    return i < lay_.k ? z[lay_.fh + static_cast<Eigen::Index>(i)] * sh_ : 0.0;
  }
  double fa(const Vector& z, std::size_t i) const { return z[lay_.fa + static_cast<Eigen::Index>(i)] * sa_; }
  double fb(const Vector& z, std::size_t i) const {
    return lay_.partial && i < lay_.k ? z[lay_.fb + static_cast<Eigen::Index>(i)] * sb_ : 0.0;
  }
  double price(const Vector& z, std::size_t i) const { return z[lay_.p + static_cast<Eigen::Index>(i)] * sp_; }

  RouteOffer offer(const Vector& z) const {
    RouteOffer o;
    o.alt_latency = pb_.alt_latency;
    const double lk = common_latency(z);
    for (std::size_t i = 0; i < lay_.n; ++i) {
      o.latencies.push_back(i < lay_.k ? lk : pb_.network.free_flow(i));
      o.prices.push_back(price(z, i));
    }
    return o;
  }

  optim::Bounds bounds(const std::vector<bool>& dominated) const {
    optim::Bounds b{Vector::Zero(lay_.size), Vector::Zero(lay_.size)};
    for (std::size_t i = 0; i < lay_.k; ++i) {
      b.upper[lay_.fh + static_cast<Eigen::Index>(i)] = pb_.lambda_h > 0.0 ? 1.0 : 0.0;
      if (lay_.partial) b.upper[lay_.fb + static_cast<Eigen::Index>(i)] = 1.0;
    }
    for (std::size_t i = 0; i < lay_.n; ++i) {
      b.upper[lay_.fa + static_cast<Eigen::Index>(i)] = pb_.lambda_a > 0.0 && !dominated[i] ? 1.0 : 0.0;
      b.upper[lay_.p + static_cast<Eigen::Index>(i)] = 1.0;
    }
    if (lay_.congested) {
      b.lower[lay_.lat] = 1.0;
      b.upper[lay_.lat] = lat_hi_ / ak_;
    }
    return b;
  }

  Vector initial_point(std::mt19937_64& rng, std::vector<bool>& dominated) const {
    Vector z = Vector::Zero(lay_.size);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    auto dirichlet = [&](std::size_t count) {
      std::vector<double> w(count);
      double total = 0.0;
      for (double& v : w) total += (v = expo(rng));
      for (double& v : w) v /= total;
      return w;
    };
    if (pb_.lambda_h > 0.0) {
      const auto w = dirichlet(lay_.k);
      for (std::size_t i = 0; i < lay_.k; ++i) z[lay_.fh + static_cast<Eigen::Index>(i)] = w[i];
    }
    for (std::size_t i = 0; i < lay_.n; ++i) z[lay_.p + static_cast<Eigen::Index>(i)] = unit(rng);
    if (lay_.congested) z[lay_.lat] = 1.0 + unit(rng) * (lat_hi_ / ak_ - 1.0);
    if (lay_.partial) {
      const auto w = dirichlet(lay_.k);
      for (std::size_t i = 0; i < lay_.k; ++i) z[lay_.fb + static_cast<Eigen::Index>(i)] = w[i];
    }

    const RouteOffer o = offer(z);
    dominated = dominated_mask(o);
    if (pb_.lambda_a > 0.0) {
      // Autonomous flows start consistent with the choice model; the pooled
      // share of roads 1..k is split at random.
      const auto q = expected_fractions(pb_.population, o);
      double pooled = 0.0;
      for (std::size_t i = 0; i < lay_.k; ++i) pooled += q[i + 1];
      const auto w = dirichlet(lay_.k);
      double wsum = 0.0;
      for (std::size_t i = 0; i < lay_.k; ++i) wsum += dominated[i] ? 0.0 : w[i];
      for (std::size_t i = 0; i < lay_.n; ++i) {
        double share = 0.0;
        if (dominated[i]) {
          share = 0.0;
        } else if (i < lay_.k) {
          share = pooled * w[i] / wsum;
        } else {
          share = q[i + 1];
        }
        z[lay_.fa + static_cast<Eigen::Index>(i)] = share * pb_.lambda_a / sa_;
      }
    }
    return z;
  }

  // Nudges prices of faster roads upward until the dominated set equals
  // `want` again. Used when a solve with `want` frozen converges onto the
  // boundary where the set flips.
  bool restore(Vector& z, const std::vector<bool>& want) const {
    constexpr double margin = 1e-7;
    const std::size_t n = lay_.n;
    for (std::size_t pass = 0; pass <= n * n; ++pass) {
      const RouteOffer o = offer(z);
      if (dominated_mask(o) == want) return true;
      bool changed = false;
      for (std::size_t j = 0; j < n; ++j) {
        if (want[j]) continue;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == j || o.latencies[i] > o.latencies[j]) continue;
          const Eigen::Index pi = lay_.p + static_cast<Eigen::Index>(i);
          const Eigen::Index pj = lay_.p + static_cast<Eigen::Index>(j);
          const double floor = o.latencies[i] < o.latencies[j] ? z[pj] + margin : z[pj];
          if (z[pi] < floor && floor <= 1.0) {
            z[pi] = floor;
            changed = true;
          }
        }
      }
      if (!changed) return false;
    }
    return dominated_mask(offer(z)) == want;
  }

  optim::NlpProblem nlp(const std::vector<bool>& dominated) {
    dominated_ = dominated;
    cache_valid_ = false;
    optim::NlpProblem prob;
    prob.bounds = bounds(dominated);
    prob.objective = [this](const Vector& z, Vector& g) { return objective(z, g); };
    prob.equality_count = static_cast<Eigen::Index>(1 + (lay_.n - lay_.k) + 1 + (lay_.k - 1) +
                                                    (lay_.congested ? 1 : 0) + (lay_.partial ? 1 : 0));
    prob.equalities = [this](const Vector& z, Vector& c, Matrix& j) { equalities(z, c, j); };
    prob.inequality_count = static_cast<Eigen::Index>(lay_.n + 1);
    prob.inequalities = [this](const Vector& z, Vector& h, Matrix& j) { inequalities(z, h, j); };
    return prob;
  }

  PricingSolution decode(const Vector& z) const {
    PricingSolution s;
    const std::size_t n = lay_.n;
    s.routing = Routing(n);
    s.k = lay_.k;
    if (lay_.partial) s.f_b = std::vector<double>(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      s.routing.human[i] = fh(z, i);
      s.routing.autonomous[i] = fa(z, i);
      s.routing.congested[i] = i + 1 < lay_.k || (i + 1 == lay_.k && lay_.congested);
      s.prices.push_back(price(z, i));
      if (lay_.partial) (*s.f_b)[i] = fb(z, i);
    }
    return s;
  }

 private:
  const FractionsWithGradient& fractions(const Vector& z) {
    if (!cache_valid_ || z != cache_z_) {
      cache_ = expected_fractions_with_gradient(pb_.population, offer(z), dominated_);
      cache_z_ = z;
      cache_valid_ = true;
    }
    return cache_;
  }

  double objective(const Vector& z, Vector& g) {
    g.setZero();
    const std::size_t n = lay_.n;
    const double lk = common_latency(z);
    double total = 0.0;
    double weighted = 0.0;
    std::vector<double> x(n), lat(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = fh(z, i) + fa(z, i);
      lat[i] = i < lay_.k ? lk : pb_.network.free_flow(i);
      total += x[i];
      weighted += x[i] * lat[i];
    }
    const double t = std::max(total, 1e-12);
    const double avg = weighted / t;
    double pooled = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = (lat[i] - avg) / t - pb_.theta;
      if (i < lay_.k) g[lay_.fh + static_cast<Eigen::Index>(i)] = dx * sh_;
      g[lay_.fa + static_cast<Eigen::Index>(i)] = dx * sa_;
      if (i < lay_.k) pooled += x[i];
    }
    if (lay_.congested) g[lay_.lat] = pooled / t * ak_;
    return avg - pb_.theta * total;
  }

  void equalities(const Vector& z, Vector& c, Matrix& jac) {
    jac.setZero();
    const std::size_t n = lay_.n;
    const std::size_t k = lay_.k;
    const double la = pb_.lambda_a;
    const auto& fr = fractions(z);
    auto q_row = [&](Eigen::Index row, std::size_t option, double sign) {
      // adds sign * (-la * q_option) / sa to row's derivatives
      for (std::size_t m = 0; m < n; ++m) {
        jac(row, lay_.p + static_cast<Eigen::Index>(m)) +=
            -sign * la * fr.d_price[option * n + m] * sp_ / sa_;
      }
      if (lay_.congested) {
        double dl = 0.0;
        for (std::size_t m = 0; m < k; ++m) dl += fr.d_latency[option * n + m];
        jac(row, lay_.lat) += -sign * la * dl * ak_ / sa_;
      }
    };

    Eigen::Index row = 0;
    double humans = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      humans += fh(z, i);
      jac(row, lay_.fh + static_cast<Eigen::Index>(i)) = 1.0;
    }
    c[row++] = (humans - pb_.lambda_h) / sh_;

    for (std::size_t j = k; j < n; ++j) {
      c[row] = (fa(z, j) - la * fr.q[j + 1]) / sa_;
      jac(row, lay_.fa + static_cast<Eigen::Index>(j)) = 1.0;
      q_row(row, j + 1, 1.0);
      ++row;
    }

    double placed = 0.0;
    double chosen = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      placed += fa(z, i);
      chosen += fr.q[i + 1];
      jac(row, lay_.fa + static_cast<Eigen::Index>(i)) = 1.0;
      q_row(row, i + 1, 1.0);
    }
    c[row++] = (placed - la * chosen) / sa_;

    const double lk = common_latency(z);
    const std::size_t lines = lay_.congested ? k : k - 1;
    for (std::size_t i = 0; i < lines; ++i) {
      const Road& r = pb_.network[i];
      const CongestionLine line = congestion_line(r, lk);
      const double h = fh(z, i);
      const double a = fa(z, i) + fb(z, i);
      c[row] = (line.human * h + line.autonomous * a - line.rhs) / line.rhs;
      jac(row, lay_.fh + static_cast<Eigen::Index>(i)) = line.human * sh_ / line.rhs;
      jac(row, lay_.fa + static_cast<Eigen::Index>(i)) = line.autonomous * sa_ / line.rhs;
      if (lay_.partial) jac(row, lay_.fb + static_cast<Eigen::Index>(i)) = line.autonomous * sb_ / line.rhs;
      if (lay_.congested) jac(row, lay_.lat) = (h + a) / r.length * ak_ / line.rhs;
      ++row;
    }

    if (lay_.partial) {
      double un = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        un += fb(z, i);
        jac(row, lay_.fb + static_cast<Eigen::Index>(i)) = 1.0;
      }
      c[row++] = (un - *pb_.uncontrolled_lambda_b) / sb_;
    }
  }

  void inequalities(const Vector& z, Vector& h, Matrix& jac) {
    jac.setZero();
    const std::size_t n = lay_.n;
    for (std::size_t i = 0; i < n; ++i) {
      const Road& r = pb_.network[i];
      const auto row = static_cast<Eigen::Index>(i);
      const double used = r.headway_human * fh(z, i) + r.headway_auto * (fa(z, i) + fb(z, i));
      h[row] = (used - capacity_[i]) / capacity_[i];
      if (i < lay_.k) jac(row, lay_.fh + row) = r.headway_human * sh_ / capacity_[i];
      jac(row, lay_.fa + row) = r.headway_auto * sa_ / capacity_[i];
      if (lay_.partial && i < lay_.k) jac(row, lay_.fb + row) = r.headway_auto * sb_ / capacity_[i];
    }
    const auto row = static_cast<Eigen::Index>(n);
    const double scale = std::max(1.0, std::abs(pb_.profit_floor));
    double profit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double margin = price(z, i) - pb_.network[i].length * pb_.fuel_cost;
      profit += fa(z, i) * margin;
      jac(row, lay_.fa + static_cast<Eigen::Index>(i)) = -margin * sa_ / scale;
      jac(row, lay_.p + static_cast<Eigen::Index>(i)) = -fa(z, i) * sp_ / scale;
    }
    h[row] = (pb_.profit_floor - profit) / scale;
  }

  const PricingProblem& pb_;
  Layout lay_;
  double sh_, sa_, sb_, sp_, ak_;
  double lat_hi_ = kInf;
  std::vector<double> capacity_;
  std::vector<bool> dominated_;
  bool cache_valid_ = false;
  Vector cache_z_;
  FractionsWithGradient cache_;
};

std::mt19937_64 restart_rng(std::uint64_t seed, std::size_t k, bool congested, std::size_t restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(congested ? 1 : 0),
                    static_cast<std::uint32_t>(restart)};
  return std::mt19937_64(seq);
}

void finish(const PricingProblem& problem, PricingSolution& s) {
  const RoadNetwork& net = problem.network;
  RouteOffer o;
  o.alt_latency = problem.alt_latency;
  std::vector<double> auto_total = s.routing.autonomous;
  if (s.f_b) {
    for (std::size_t i = 0; i < auto_total.size(); ++i) auto_total[i] += (*s.f_b)[i];
  }
  for (std::size_t i = 0; i < net.size(); ++i) {
    o.latencies.push_back(road_latency(net[i], s.routing.human[i], auto_total[i], s.routing.congested[i]));
    o.prices.push_back(s.prices[i]);
  }
  s.q = expected_fractions(problem.population, o);
  s.profit = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    s.profit += s.routing.autonomous[i] * (s.prices[i] - net[i].length * problem.fuel_cost);
  }
  s.objective = social_objective(net, s.routing, problem.theta);
}

void validate_problem(const PricingProblem& p) {
  const ValidationReport report = validate_network(p.network);
  if (!report.ok()) throw ValidationError("invalid network", report.violations);
  if (p.network.size() == 0) throw DataError("pricing needs at least one road");
  auto nonneg = [](double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError(std::string(what) + " must be nonnegative");
  };
  nonneg(p.lambda_h, "lambda_h");
  nonneg(p.lambda_a, "lambda_a");
  nonneg(p.theta, "theta");
  nonneg(p.profit_floor, "profit_floor");
  nonneg(p.fuel_cost, "fuel_cost");
  if (!(p.alt_latency > 0.0)) throw DataError("alt_latency must be positive");
  if (p.uncontrolled_lambda_b) nonneg(*p.uncontrolled_lambda_b, "lambda_b");
  if (p.population.samples.empty()) throw DataError("population must contain at least one sample");
  for (const auto& s : p.population.samples) {
    if (!(s.omega1 >= 0.0 && s.omega2 >= 0.0 && s.zeta >= 0.0)) {
      throw DataError("population parameters must be nonnegative");
    }
  }
}

PricingSolution solve(const PricingProblem& problem, const PricingConfig& config, bool partial) {
  validate_problem(problem);
  const std::size_t n = problem.network.size();
  const double p_max = price_ceiling(problem);
  const bool all_price_sensitive =
      std::all_of(problem.population.samples.begin(), problem.population.samples.end(),
                  [](const UserParams& u) { return u.omega2 > 0.0; });

  optim::AugLagOptions al;
  al.constraint_tolerance = config.constraint_tolerance;
  al.optimality_tolerance = config.optimality_tolerance;
  al.max_iterations = config.max_iterations;

  std::optional<PricingSolution> best;
  double best_violation = kInf;
  std::size_t restarts = 0, accepted = 0, iterations = 0;

  for (std::size_t k = 1; k <= n; ++k) {
    for (bool congested : {false, true}) {
      if (congested && all_price_sensitive) continue;
      Branch branch(problem, k, congested, partial, p_max);
      for (std::size_t r = 0; r < config.restarts; ++r) {
        ++restarts;
        auto rng = restart_rng(config.seed, k, congested, r);
        bool restart_accepted = false;
        auto consider = [&](const Vector& z) {
          PricingSolution cand = branch.decode(z);
          double total = 0.0;
          for (std::size_t i = 0; i < n; ++i) total += cand.routing.total(i);
          if (!(total > 0.0)) return;
          finish(problem, cand);
          const double viol = evaluate_constraints(problem, cand).max_normalized();
          best_violation = std::min(best_violation, viol);
          if (!(viol < config.acceptance_tolerance)) return;
          restart_accepted = true;
          if (best && !(cand.objective < best->objective)) return;
          cand.diagnostics.best_restart = restarts - 1;
          cand.diagnostics.max_residual = viol;
          best = std::move(cand);
        };

        std::vector<bool> dominated;
        Vector z = branch.initial_point(rng, dominated);
        for (int attempt = 0; attempt <= config.max_resolves; ++attempt) {
          const auto nlp = branch.nlp(dominated);
          const optim::AugLagResult res = optim::solve_augmented_lagrangian(nlp, z, al);
          iterations += static_cast<std::size_t>(res.iterations);
          z = res.x;
          const auto now = dominated_mask(branch.offer(z));
          if (now == dominated) {
            consider(z);
            break;
          }
          if (Vector kept = z; branch.restore(kept, dominated)) consider(kept);
          dominated = now;
        }
        if (restart_accepted) ++accepted;
      }
    }
  }
  if (!best) {
    throw InfeasibleError("no restart reached a feasible pricing candidate", best_violation);
  }
  best->diagnostics.restarts = restarts;
  best->diagnostics.accepted_restarts = accepted;
  best->diagnostics.inner_iterations = iterations;
  return *best;
}

}  // namespace

double social_objective(const RoadNetwork& network, const Routing& routing, double theta) {
  if (routing.size() != network.size()) throw std::invalid_argument("routing size differs from network");
  double total = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < network.size(); ++i) {
    const double f = routing.total(i);
    total += f;
    weighted += f * road_latency(network[i], routing.human[i], routing.autonomous[i], routing.congested[i]);
  }
  if (!(total > 0.0)) throw DomainError("social objective is undefined without flow");
  return weighted / total - theta * total;
}

double Residual::normalized() const {
  const double s = std::max(scale, 1.0);
  if (std::isnan(value)) return kInf;
  return (equality ? std::abs(value) : std::max(0.0, -value)) / s;
}

double ResidualReport::max_normalized() const {
  double worst = 0.0;
  for (const auto& r : residuals) worst = std::max(worst, r.normalized());
  return worst;
}

const Residual* ResidualReport::find(const std::string& id) const {
  for (const auto& r : residuals) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

ResidualReport evaluate_constraints(const PricingProblem& problem, const PricingSolution& c) {
  const RoadNetwork& net = problem.network;
  const std::size_t n = net.size();
  if (c.routing.size() != n || c.prices.size() != n || (c.f_b && c.f_b->size() != n)) {
    throw std::invalid_argument("candidate dimensions differ from the network");
  }
  if (c.k < 1 || c.k > n) throw std::out_of_range("candidate k outside [1, N]");
  const std::size_t k = c.k;
  const auto& fh = c.routing.human;
  const auto& fa = c.routing.autonomous;
  std::vector<double> fb = c.f_b.value_or(std::vector<double>(n, 0.0));

  RouteOffer o;
  o.alt_latency = problem.alt_latency;
  std::vector<double> lat(n);
  for (std::size_t i = 0; i < n; ++i) {
    lat[i] = road_latency(net[i], fh[i], fa[i] + fb[i], c.routing.congested[i]);
    o.latencies.push_back(lat[i]);
    o.prices.push_back(c.prices[i]);
  }
  const auto dominated = dominated_mask(o);
  const auto q = expected_fractions(problem.population, o);
  const double la = problem.lambda_a;

  ResidualReport rep;
  auto add = [&](std::string id, double value, bool equality, double scale) {
    rep.residuals.push_back({std::move(id), value, equality, scale});
  };
  auto road = [](const char* stem, std::size_t i) { return std::string(stem) + "[" + std::to_string(i + 1) + "]"; };

  double humans = 0.0;
  for (double v : fh) humans += v;
  add("human_demand", humans - problem.lambda_h, true, problem.lambda_h);

  double pooled_flow = 0.0;
  double pooled_share = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= k || dominated[i]) {
      add(road("choice_route", i), fa[i] - la * q[i + 1], true, la);
    } else {
      pooled_flow += fa[i];
      pooled_share += q[i + 1];
    }
  }
  add("choice_pooled", pooled_flow - la * pooled_share, true, la);

  const double lk = lat[k - 1];
  const double ak = net.free_flow(k - 1);
  add("eq_latency_low", lk - ak, false, ak);
  if (k < n) add("eq_latency_high", net.free_flow(k) - lk, false, ak);

  for (std::size_t j = k; j < n; ++j) add(road("human_beyond_k", j), fh[j], true, problem.lambda_h);

  for (std::size_t i = 0; i + 1 < k; ++i) {
    const double li = fh[i] + fa[i] + fb[i] > 0.0 ? road_latency(net[i], fh[i], fa[i] + fb[i], true) : kInf;
    add(road("equal_latency", i), li - lk, true, lk);
  }

  double lowest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = fa[i] + fb[i];
    const double cap = max_flow(net[i], autonomy_level(fh[i], a));
    add(road("capacity", i), cap - (fh[i] + a), false, cap);
    lowest = std::min({lowest, fh[i], fa[i], fb[i]});
  }
  add("nonnegative_flows", lowest, false, 1.0);

  double profit = 0.0;
  for (std::size_t i = 0; i < n; ++i) profit += fa[i] * (c.prices[i] - net[i].length * problem.fuel_cost);
  add("profit", profit - problem.profit_floor, false, problem.profit_floor);

  if (problem.uncontrolled_lambda_b) {
    double un = 0.0;
    for (double v : fb) un += v;
    add("uncontrolled_demand", un - *problem.uncontrolled_lambda_b, true, *problem.uncontrolled_lambda_b);
    for (std::size_t j = k; j < n; ++j) add(road("uncontrolled_beyond_k", j), fb[j], true, *problem.uncontrolled_lambda_b);
  }
  return rep;
}

bool StructureReport::pass() const {
  return std::all_of(clauses.begin(), clauses.end(), [](const StructureClause& c) { return c.pass; });
}

StructureReport verify_structure(const PricingProblem& problem, const PricingSolution& s) {
  constexpr double rel = 1e-4;
  const RoadNetwork& net = problem.network;
  const std::size_t n = net.size();
  const std::size_t k = s.k;
  std::vector<double> fb = s.f_b.value_or(std::vector<double>(n, 0.0));
  std::vector<double> lat(n);
  for (std::size_t i = 0; i < n; ++i) {
    lat[i] = road_latency(net[i], s.routing.human[i], s.routing.autonomous[i] + fb[i], s.routing.congested[i]);
  }
  StructureReport rep;
  const double ak = net.free_flow(k - 1);
  const bool free_k = !s.routing.congested[k - 1] || std::abs(lat[k - 1] - ak) <= rel * ak;
  rep.clauses.push_back({"free_flow_road", free_k,
                         "road " + std::to_string(k) + " latency " + std::to_string(lat[k - 1]) +
                             " vs free-flow " + std::to_string(ak)});

  StructureClause eq{"equal_latency", true, ""};
  for (std::size_t i = 0; i + 1 < k; ++i) {
    if (std::abs(lat[i] - lat[k - 1]) > rel * lat[k - 1]) {
      eq.pass = false;
      eq.detail = "road " + std::to_string(i + 1) + " latency " + std::to_string(lat[i]) + " differs from road " +
                  std::to_string(k) + " latency " + std::to_string(lat[k - 1]);
      break;
    }
  }
  rep.clauses.push_back(eq);

  StructureClause beyond{"no_human_beyond_k", true, ""};
  const double slack = rel * std::max(1.0, problem.lambda_h);
  for (std::size_t j = k; j < n; ++j) {
    if (s.routing.human[j] > slack) {
      beyond.pass = false;
      beyond.detail = "road " + std::to_string(j + 1) + " carries human flow";
      break;
    }
  }
  rep.clauses.push_back(beyond);
  return rep;
}

double price_ceiling(const PricingProblem& problem) {
  const RoadNetwork& net = problem.network;
  double max_d = 0.0;
  double max_a = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    max_d = std::max(max_d, net[i].length);
    max_a = std::max(max_a, net.free_flow(i));
  }
  double max_w1 = 0.0;
  double min_w2 = kInf;
  for (const auto& s : problem.population.samples) {
    max_w1 = std::max(max_w1, s.omega1);
    min_w2 = std::min(min_w2, s.omega2);
  }
  const double ratio = min_w2 > 0.0 ? std::min(max_w1 / min_w2, 1e3) : 1e3;
  const double p = 10.0 * problem.fuel_cost * max_d + 10.0 * max_a * ratio;
  return p > 0.0 ? p : 1.0;
}

PricingSolution solve_pricing(const PricingProblem& problem, const PricingConfig& config) {
  PricingProblem plain = problem;
  plain.uncontrolled_lambda_b.reset();
  return solve(plain, config, false);
}

PricingSolution solve_pricing_partial_control(const PricingProblem& problem, const PricingConfig& config) {
  if (!problem.uncontrolled_lambda_b) throw DataError("partial control needs lambda_b");
  return solve(problem, config, true);
}

std::optional<PricingSolution> all_decline_baseline(const PricingProblem& problem) {
  if (!(problem.lambda_h > 0.0)) return std::nullopt;
  EquilibriumResult eq;
  try {
    eq = solve_bne(problem.network, {problem.lambda_h, 0.0});
  } catch (const InfeasibleError&) {
    return std::nullopt;
  }
  PricingSolution s;
  s.routing = eq.routing;
  s.k = eq.m_eq;
  s.prices.assign(problem.network.size(), 0.0);
  s.q.assign(problem.network.size() + 1, 0.0);
  s.q[0] = 1.0;
  s.profit = 0.0;
  s.objective = social_objective(problem.network, s.routing, problem.theta);
  return s;
}

}  // namespace mixtraffic
