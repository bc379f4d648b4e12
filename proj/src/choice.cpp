#include "mixtraffic/choice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mixtraffic/errors.hpp"

namespace mixtraffic {

namespace {

// Pairwise (tree) summation of per-sample rows so the result does not depend
// on how a caller might split the work.
void pairwise_accumulate(const std::vector<std::vector<double>>& rows, std::size_t begin,
                         std::size_t end, std::vector<double>& out) {
  if (end - begin == 1) {
    out = rows[begin];
    return;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  std::vector<double> right;
  pairwise_accumulate(rows, begin, mid, out);
  pairwise_accumulate(rows, mid, end, right);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += right[i];
}

}  // namespace

void validate_offer(const RouteOffer& offer) {
  if (offer.latencies.size() != offer.prices.size()) {
    throw DataError("offer latencies and prices differ in length");
  }
  for (double l : offer.latencies) {
    if (!(l > 0.0) || !std::isfinite(l)) throw DataError("offer latencies must be positive");
  }
  for (double p : offer.prices) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DataError("offer prices must be nonnegative");
  }
  if (!(offer.alt_latency > 0.0) || !std::isfinite(offer.alt_latency)) {
    throw DataError("alternative latency must be positive");
  }
}

std::vector<bool> dominated_mask(const RouteOffer& offer) {
  const std::size_t n = offer.routes();
  std::vector<bool> dominated(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = offer.prices[i];
    const double li = offer.latencies[i];
    for (std::size_t k = 0; k < n && !dominated[i]; ++k) {
      if (k == i) continue;
      const double pk = offer.prices[k];
      const double lk = offer.latencies[k];
      dominated[i] = (pi > pk && li >= lk) || (pi >= pk && li > lk);
    }
  }
  return dominated;
}

std::vector<std::size_t> dominated_set(const RouteOffer& offer) {
  const auto mask = dominated_mask(offer);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(i + 1);
  }
  return out;
}

double reward(const UserParams& user, const RouteOffer& offer, std::size_t option) {
  if (option > offer.routes()) throw std::out_of_range("option index out of range");
  if (option == 0) return -user.zeta * offer.alt_latency;
  if (dominated_mask(offer)[option - 1]) return -std::numeric_limits<double>::infinity();
  return -user.omega1 * offer.latencies[option - 1] - user.omega2 * offer.prices[option - 1];
}

std::vector<double> choice_probabilities(const UserParams& user, const RouteOffer& offer,
                                         const std::vector<bool>& dominated) {
  const std::size_t n = offer.routes();
  std::vector<double> r(n + 1);
  r[0] = -user.zeta * offer.alt_latency;
  double top = r[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (dominated[i]) continue;
    r[i + 1] = -user.omega1 * offer.latencies[i] - user.omega2 * offer.prices[i];
    top = std::max(top, r[i + 1]);
  }
  std::vector<double> p(n + 1, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    if (i > 0 && dominated[i - 1]) continue;
    p[i] = std::exp(r[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> choice_probabilities(const UserParams& user, const RouteOffer& offer) {
  return choice_probabilities(user, offer, dominated_mask(offer));
}

std::vector<double> expected_fractions(const PopulationSamples& population, const RouteOffer& offer) {
  if (population.samples.empty()) throw DataError("population must contain at least one sample");
  const auto dominated = dominated_mask(offer);
  std::vector<std::vector<double>> rows;
  rows.reserve(population.size());
  for (const auto& s : population.samples) rows.push_back(choice_probabilities(s, offer, dominated));
  std::vector<double> q;
  pairwise_accumulate(rows, 0, rows.size(), q);
  const double inv = 1.0 / static_cast<double>(population.size());
  for (double& v : q) v *= inv;
  return q;
}

FractionsWithGradient expected_fractions_with_gradient(const PopulationSamples& population,
                                                       const RouteOffer& offer,
                                                       const std::vector<bool>& dominated) {
  if (population.samples.empty()) throw DataError("population must contain at least one sample");
  const std::size_t n = offer.routes();
  const std::size_t k = n + 1;
  FractionsWithGradient out;
  out.q.assign(k, 0.0);
  out.d_latency.assign(k * n, 0.0);
  out.d_price.assign(k * n, 0.0);
  out.d_alt.assign(k, 0.0);
  const double inv = 1.0 / static_cast<double>(population.size());
  for (const auto& s : population.samples) {
    const auto p = choice_probabilities(s, offer, dominated);
    // d p_i / d r_j = p_i (delta_ij - p_j); r_j depends on latency_j, price_j
    // (routes) or alt_latency (decline).
    for (std::size_t i = 0; i < k; ++i) {
      out.q[i] += inv * p[i];
      if (p[i] == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) {
        if (p[j] == 0.0) continue;
        const double dpdr = inv * p[i] * ((i == j ? 1.0 : 0.0) - p[j]);
        if (j == 0) {
          out.d_alt[i] += dpdr * -s.zeta;
        } else {
          out.d_latency[i * n + (j - 1)] += dpdr * -s.omega1;
          out.d_price[i * n + (j - 1)] += dpdr * -s.omega2;
        }
      }
    }
  }
  return out;
}

}  // namespace mixtraffic
