#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mixtraffic/choice.hpp"

namespace mixtraffic {

struct ChoiceDatum {
  RouteOffer offer;
  /// 0 = declined, 1..N = route.
  std::size_t chosen = 0;

  bool operator==(const ChoiceDatum&) const = default;
};

/// Throws DataError for an invalid offer, an out-of-range choice, or a
/// recorded choice of a dominated route.
void validate_datum(const ChoiceDatum& datum);

/// Prior over (omega1, omega2, zeta). The box is always the support; an
/// optional custom log-density replaces the flat density inside it. A
/// coordinate with lower == upper is held fixed by the sampler.
struct Prior {
  std::array<double, 3> lower{0.0, 0.0, 0.0};
  std::array<double, 3> upper{2.0, 2.0, 2.0};
  std::function<double(const UserParams&)> log_density;

  static Prior uniform_box(std::array<double, 3> lower, std::array<double, 3> upper);

  /// Throws DataError unless bounds are finite, lower >= 0 and lower <= upper.
  void validate() const;
  bool contains(const UserParams& p) const;
  /// -infinity outside the box.
  double log_prob(const UserParams& p) const;
  UserParams center() const;
};

UserParams params_from_array(const std::array<double, 3>& a);
std::array<double, 3> params_to_array(const UserParams& p);

/// log P(chosen | params, offer) computed in log space.
double log_choice_probability(const UserParams& params, const RouteOffer& offer,
                              const std::vector<bool>& dominated, std::size_t chosen);

double log_posterior_unnorm(const UserParams& params, const std::vector<ChoiceDatum>& data,
                            const Prior& prior);

struct MhConfig {
  /// 0 derives the chain from `thinning` with a 20% burn-in.
  std::size_t chain_length = 0;
  /// Only read with an explicit chain_length.
  std::size_t burn_in = 0;
  std::size_t thinning = 50;
  /// Proposal standard deviation as a fraction of the prior box width.
  std::array<double, 3> proposal_scale{0.05, 0.05, 0.05};
  std::uint64_t seed = 0;
};

struct MhDiagnostics {
  std::size_t chain_length = 0;
  std::size_t burn_in = 0;
  std::size_t thinning = 0;
  double acceptance_rate = 0.0;
};

/// Random-walk Metropolis-Hastings; proposals outside the prior box are
/// rejected. Deterministic given cfg.seed.
PopulationSamples sample_posterior(const std::vector<ChoiceDatum>& data, const Prior& prior,
                                   std::size_t m, const MhConfig& cfg, MhDiagnostics* diag = nullptr);

struct Query {
  RouteOffer offer;

  bool operator==(const Query&) const = default;
};

/// Box over each option's (latency, price) and the decline latency.
struct QuerySpace {
  std::size_t options = 3;
  double latency_lo = 0.5, latency_hi = 20.0;
  double price_lo = 0.0, price_hi = 20.0;
  double alt_latency_lo = 3.0, alt_latency_hi = 3.0;

  /// Throws DataError for an empty or inverted box.
  void validate() const;
};

/// Sum over outcomes of the squared summed outcome probability; lower is
/// more informative.
double query_objective(const Query& query, const PopulationSamples& samples);

struct SynthesisConfig {
  std::size_t restarts = 1000;
  std::uint64_t seed = 0;
  int max_iterations = 100;
};

Query random_query(const QuerySpace& space, std::mt19937_64& rng);

/// Multistart bounded quasi-Newton minimization of query_objective. The
/// dominated set is frozen at each start and the result rescored with the
/// real one.
Query synthesize_query(const PopulationSamples& samples, const QuerySpace& space,
                       const SynthesisConfig& cfg = {});

/// Draws a choice from the logit model of `truth`.
std::size_t simulate_choice(const UserParams& truth, const RouteOffer& offer, std::mt19937_64& rng);

struct PosteriorSummary {
  std::array<double, 3> mean{};
  std::array<double, 3> variance{};
  double trace_covariance = 0.0;
};

PosteriorSummary summarize(const PopulationSamples& samples);

struct LearnSimConfig {
  Prior prior;
  QuerySpace space;
  std::size_t samples = 100;
  /// Posterior sample count used for the reported statistics.
  std::size_t eval_samples = 100;
  MhConfig mh;
  SynthesisConfig synthesis;
  std::size_t budget = 10;
  std::uint64_t seed = 0;
};

struct CurveRow {
  std::size_t query = 0;  // 1-based
  double mean_error = 0.0;
  double trace_covariance = 0.0;

  bool operator==(const CurveRow&) const = default;
};

/// Simulated elicitation of one user: `budget` queries, either synthesized
/// (active) or uniform at random, each answered by the logit model of
/// `truth`. One row per answered query.
std::vector<CurveRow> learning_curve(const UserParams& truth, bool active, const LearnSimConfig& cfg);

}  // namespace mixtraffic
