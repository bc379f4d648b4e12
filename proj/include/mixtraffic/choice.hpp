#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mixtraffic {

/// Reward parameters of one autonomous-service user: utility lost per unit
/// time (omega1), per unit money (omega2), and per unit time of the
/// alternative travel mode (zeta).
struct UserParams {
  double omega1 = 0.0;
  double omega2 = 0.0;
  double zeta = 0.0;

  bool operator==(const UserParams&) const = default;
};

/// A menu of priced routes plus the decline option.
///
/// Option indices follow the choice convention: 0 is "decline the service",
/// 1..N are the routes in order.
struct RouteOffer {
  std::vector<double> latencies;
  std::vector<double> prices;
  double alt_latency = 1.0;

  std::size_t routes() const noexcept { return latencies.size(); }
  bool operator==(const RouteOffer&) const = default;
};

/// Samples representing the population distribution of UserParams.
struct PopulationSamples {
  std::vector<UserParams> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool operator==(const PopulationSamples&) const = default;
};

/// Throws DataError if latencies are not positive, prices are negative, the
/// vectors differ in length, or alt_latency is not positive.
void validate_offer(const RouteOffer& offer);

/// Route indices (1-based option numbers) that are strictly dominated by some
/// other route in price and latency. Equal (price, latency) pairs do not
/// dominate each other.
std::vector<std::size_t> dominated_set(const RouteOffer& offer);

/// dominated[i] for route i (0-based route position).
std::vector<bool> dominated_mask(const RouteOffer& offer);

/// Reward of option `option` (0 = decline); -infinity for dominated routes.
double reward(const UserParams& user, const RouteOffer& offer, std::size_t option);

/// Multinomial-logit probabilities over options 0..N. Dominated routes get
/// exactly zero.
std::vector<double> choice_probabilities(const UserParams& user, const RouteOffer& offer);

/// Same as above with an explicit dominance mask (length N), for callers that
/// hold the dominated set fixed while optimizing over the offer.
std::vector<double> choice_probabilities(const UserParams& user, const RouteOffer& offer,
                                         const std::vector<bool>& dominated);

/// Monte-Carlo estimate of the expected fraction choosing each option,
/// averaging over the population samples with a pairwise summation.
std::vector<double> expected_fractions(const PopulationSamples& population, const RouteOffer& offer);

/// Expected fractions with the dominated set held fixed, together with their
/// derivatives: d_latency(i, j) = d q_i / d latency_j, d_price(i, j) = d q_i / d price_j,
/// d_alt[i] = d q_i / d alt_latency. Matrices are row-major (N+1) x N.
struct FractionsWithGradient {
  std::vector<double> q;
  std::vector<double> d_latency;
  std::vector<double> d_price;
  std::vector<double> d_alt;
};

FractionsWithGradient expected_fractions_with_gradient(const PopulationSamples& population,
                                                       const RouteOffer& offer,
                                                       const std::vector<bool>& dominated);

}  // namespace mixtraffic
