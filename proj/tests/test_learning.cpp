#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixtraffic/errors.hpp"
#include "mixtraffic/learning.hpp"
#include "oracles.hpp"

using namespace mixtraffic;

namespace {

RouteOffer offer(std::vector<double> l, std::vector<double> p, double lw) {
  return RouteOffer{std::move(l), std::move(p), lw};
}

// Kolmogorov-Smirnov distance between the sample and U(lo, hi).
double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

std::vector<ChoiceDatum> simulate(const UserParams& truth, std::size_t count, std::uint64_t seed,
                                  const QuerySpace& space = {}) {
  std::mt19937_64 rng(seed);
  std::vector<ChoiceDatum> data;
  for (std::size_t i = 0; i < count; ++i) {
    const Query q = random_query(space, rng);
    data.push_back({q.offer, simulate_choice(truth, q.offer, rng)});
  }
  return data;
}

double distance(const std::array<double, 3>& a, const UserParams& b) {
  const auto t = params_to_array(b);
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[i] - t[i]) * (a[i] - t[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("datum validation") {
  CHECK_NOTHROW(validate_datum({offer({1, 2}, {1, 0}, 2), 2}));
  CHECK_NOTHROW(validate_datum({offer({1, 2}, {1, 1}, 2), 0}));
  CHECK_THROWS_AS(validate_datum({offer({1, 2}, {1, 1}, 2), 2}), DataError);
  CHECK_THROWS_AS(validate_datum({offer({1, 2}, {1, 0}, 2), 3}), DataError);
  CHECK_THROWS_AS(validate_datum({offer({-1}, {1}, 2), 0}), DataError);
}

TEST_CASE("prior") {
  const Prior p = Prior::uniform_box({0, 0, 0}, {2, 1, 4});
  CHECK(p.contains({1, 1, 0}));
  CHECK_FALSE(p.contains({1, 1.5, 0}));
  CHECK(p.log_prob({1, 0.5, 2}) == doctest::Approx(-std::log(8.0)));
  CHECK(p.log_prob({3, 0, 0}) == -std::numeric_limits<double>::infinity());
  CHECK(p.center().zeta == 2.0);
  CHECK_THROWS_AS(Prior::uniform_box({-1, 0, 0}, {1, 1, 1}).validate(), DataError);
  CHECK_THROWS_AS(Prior::uniform_box({0, 2, 0}, {1, 1, 1}).validate(), DataError);
  CHECK_THROWS_AS(Prior::uniform_box({0, 0, 0}, {1, INFINITY, 1}).validate(), DataError);
  // A degenerate coordinate carries no volume.
  CHECK(Prior::uniform_box({0, 1, 0}, {2, 1, 2}).log_prob({1, 1, 1}) == doctest::Approx(-std::log(4.0)));
}

TEST_CASE("log posterior") {
  const Prior prior = Prior::uniform_box({0, 0, 0}, {2, 2, 2});
  const UserParams u{1, 1, 1};
  CHECK(log_posterior_unnorm(u, {}, prior) == doctest::Approx(prior.log_prob(u)));

  const ChoiceDatum sym{offer({1, 2}, {1, 0}, 2), 1};
  CHECK(log_posterior_unnorm(u, {sym}, prior) == doctest::Approx(prior.log_prob(u) + std::log(1.0 / 3.0)));

  const ChoiceDatum other{offer({1, 3}, {2, 0.5}, 1.5), 0};
  const auto p1 = oracle::logit(u, sym.offer.latencies, sym.offer.prices, sym.offer.alt_latency);
  const auto p2 = oracle::logit(u, other.offer.latencies, other.offer.prices, other.offer.alt_latency);
  CHECK(log_posterior_unnorm(u, {sym, other}, prior) ==
        doctest::Approx(prior.log_prob(u) + std::log(p1[1] * p2[0])).epsilon(1e-12));

  CHECK(log_posterior_unnorm({3, 0, 0}, {sym}, prior) == -std::numeric_limits<double>::infinity());
  const ChoiceDatum bad{offer({1, 2}, {1, 1}, 2), 2};
  CHECK_THROWS_AS(log_posterior_unnorm(u, {bad}, prior), DataError);

  // Extreme rewards stay finite in log space.
  const ChoiceDatum far{offer({1}, {0}, 1000), 1};
  CHECK(std::isfinite(log_choice_probability({0, 0, 2}, far.offer, dominated_mask(far.offer), 0)));
}

TEST_CASE("empty data reproduces the prior") {
  const Prior prior = Prior::uniform_box({0, 0.5, 1}, {2, 1.5, 4});
  MhConfig cfg;
  cfg.seed = 9;
  MhDiagnostics diag;
  const auto s = sample_posterior({}, prior, 10000, cfg, &diag);
  REQUIRE(s.size() == 10000);
  CHECK(diag.thinning == 50);
  CHECK(diag.chain_length > diag.burn_in);
  std::array<std::vector<double>, 3> cols;
  for (const auto& u : s.samples) {
    const auto a = params_to_array(u);
    for (int i = 0; i < 3; ++i) cols[i].push_back(a[i]);
  }
  for (int i = 0; i < 3; ++i) {
    CAPTURE(i);
    CHECK(ks_uniform(cols[i], prior.lower[i], prior.upper[i]) < 0.05);
    const double mean = std::accumulate(cols[i].begin(), cols[i].end(), 0.0) / 10000.0;
    const double width = prior.upper[i] - prior.lower[i];
    // Thinned chain; allow for residual autocorrelation in the standard error.
    CHECK(std::abs(mean - 0.5 * (prior.lower[i] + prior.upper[i])) < 3 * 3 * width / std::sqrt(12.0 * 10000));
  }
}

TEST_CASE("one-parameter posterior matches grid quadrature") {
  // omega2 and zeta held fixed.
  const Prior prior = Prior::uniform_box({0, 0.5, 0.3}, {3, 0.5, 0.3});
  const UserParams truth{1.2, 0.5, 0.3};
  const auto data = simulate(truth, 20, 31);

  const int grid = 10000;
  std::vector<double> w(grid), x(grid);
  double top = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    x[i] = 3.0 * (i + 0.5) / grid;
    w[i] = log_posterior_unnorm({x[i], 0.5, 0.3}, data, prior);
    top = std::max(top, w[i]);
  }
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double e = std::exp(w[i] - top);
    z += e;
    m1 += e * x[i];
    m2 += e * x[i] * x[i];
  }
  const double mean = m1 / z, var = m2 / z - mean * mean;

  MhConfig cfg;
  cfg.seed = 4;
  const auto s = sample_posterior(data, prior, 10000, cfg);
  const auto sum = summarize(s);
  CHECK(sum.mean[0] == doctest::Approx(mean).epsilon(0.05));
  CHECK(sum.variance[0] == doctest::Approx(var).epsilon(0.05));
  for (const auto& u : s.samples) {
    CHECK(u.omega2 == 0.5);
    CHECK(u.zeta == 0.3);
  }
}

TEST_CASE("posterior concentrates with more data") {
  const Prior prior = Prior::uniform_box({0, 0, 0}, {2, 2, 2});
  const UserParams truth{0.8, 0.6, 0.4};
  // Routes and declining compete in this box; with the default box almost
  // every simulated user declines.
  QuerySpace space;
  space.latency_hi = 10;
  space.price_hi = 10;
  space.alt_latency_lo = 0.5;
  space.alt_latency_hi = 15;
  std::vector<double> median;
  for (std::size_t count : {20u, 50u, 200u}) {
    std::vector<double> err;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      MhConfig cfg;
      cfg.seed = seed;
      const auto s = sample_posterior(simulate(truth, count, 100 + seed, space), prior, 500, cfg);
      err.push_back(distance(summarize(s).mean, truth));
    }
    std::nth_element(err.begin(), err.begin() + 10, err.end());
    median.push_back(err[10]);
  }
  CHECK(median[1] <= median[0]);
  CHECK(median[2] <= median[1]);
}

TEST_CASE("posterior after 200 choices matches importance sampling") {
  const Prior prior = Prior::uniform_box({0, 0, 0}, {2, 2, 2});
  const UserParams truth{0.8, 0.6, 0.4};
  QuerySpace space;
  space.latency_hi = 10;
  space.price_hi = 10;
  space.alt_latency_lo = 0.5;
  space.alt_latency_hi = 15;
  const auto data = simulate(truth, 200, 55, space);

  // Self-normalized importance sampling with the prior as proposal.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 2.0);
  std::vector<std::array<double, 4>> draws;
  double top = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100000; ++i) {
    const UserParams u{unit(rng), unit(rng), unit(rng)};
    const double lp = log_posterior_unnorm(u, data, prior);
    draws.push_back({u.omega1, u.omega2, u.zeta, lp});
    top = std::max(top, lp);
  }
  std::array<double, 3> m{}, m2{};
  double z = 0.0;
  for (const auto& d : draws) {
    const double w = std::exp(d[3] - top);
    z += w;
    for (int i = 0; i < 3; ++i) {
      m[i] += w * d[i];
      m2[i] += w * d[i] * d[i];
    }
  }

  MhConfig cfg;
  cfg.seed = 1;
  const auto sum = summarize(sample_posterior(data, prior, 2000, cfg));
  const auto t = params_to_array(truth);
  for (int i = 0; i < 3; ++i) {
    CAPTURE(i);
    const double mean = m[i] / z, sd = std::sqrt(m2[i] / z - mean * mean);
    CHECK(std::abs(sum.mean[i] - mean) < 0.2 * sd);
    CHECK(std::sqrt(sum.variance[i]) == doctest::Approx(sd).epsilon(0.15));
    CHECK(std::abs(sum.mean[i] - t[i]) < 3 * sd);
  }
}

TEST_CASE("sampler determinism and config checks") {
  const Prior prior;
  const auto data = simulate({1, 1, 1}, 5, 2);
  MhConfig cfg;
  cfg.seed = 12;
  CHECK(sample_posterior(data, prior, 50, cfg).samples == sample_posterior(data, prior, 50, cfg).samples);
  cfg.seed = 13;
  CHECK(sample_posterior(data, prior, 50, cfg).samples != sample_posterior(data, prior, 50, MhConfig{}).samples);
  CHECK_THROWS_AS(sample_posterior(data, prior, 0, cfg), DataError);
  MhConfig bad;
  bad.thinning = 0;
  CHECK_THROWS_AS(sample_posterior(data, prior, 10, bad), DataError);
  bad = MhConfig{};
  bad.chain_length = 100;
  bad.burn_in = 100;
  CHECK_THROWS_AS(sample_posterior(data, prior, 10, bad), DataError);
}

TEST_CASE("query objective: hand values") {
  // One route at latency 1 and price 0, decline latency 1.
  const Query q{offer({1}, {0}, 1)};
  const UserParams even{0, 0, 0};
  const UserParams yes{0, 0, std::log(9.0)};  // (0.1, 0.9)
  const UserParams no{std::log(9.0), 0, 0};   // (0.9, 0.1)
  CHECK(query_objective(q, {{even}}) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(query_objective(q, {{UserParams{0, 0, 50}}}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(query_objective(q, {{yes, no}}) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(query_objective(q, {{yes, yes}}) == doctest::Approx(3.28).epsilon(1e-14));
  CHECK(query_objective(q, {{even, even}}) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("query objective: bounds and permutation invariance") {
  oracle::Gen g(8);
  const QuerySpace space;
  for (int n = 0; n < 300; ++n) {
    const Query q = random_query(space, g.rng);
    PopulationSamples s;
    const int m = g.integer(1, 6);
    for (int i = 0; i < m; ++i) s.samples.push_back({g.uniform(0, 2), g.uniform(0, 2), g.uniform(0, 2)});
    const double v = query_objective(q, s);
    const auto dom = dominated_mask(q.offer);
    const double undominated = static_cast<double>(std::count(dom.begin(), dom.end(), false));
    const double M2 = static_cast<double>(m * m);
    CHECK(v >= M2 / (undominated + 1) * (1 - 1e-12));
    CHECK(v <= M2 * (1 + 1e-12));

    Query shuffled = q;
    std::vector<std::size_t> perm(q.offer.routes());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g.rng);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      shuffled.offer.latencies[i] = q.offer.latencies[perm[i]];
      shuffled.offer.prices[i] = q.offer.prices[perm[i]];
    }
    PopulationSamples reversed{std::vector<UserParams>(s.samples.rbegin(), s.samples.rend())};
    CHECK(query_objective(shuffled, reversed) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("random queries stay in the space") {
  QuerySpace space;
  space.options = 4;
  space.alt_latency_lo = 2;
  space.alt_latency_hi = 5;
  std::mt19937_64 rng(1);
  for (int n = 0; n < 200; ++n) {
    const Query q = random_query(space, rng);
    REQUIRE(q.offer.routes() == 4);
    CHECK(q.offer.alt_latency >= 2);
    CHECK(q.offer.alt_latency <= 5);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(q.offer.latencies[i] >= space.latency_lo);
      CHECK(q.offer.latencies[i] <= space.latency_hi);
      CHECK(q.offer.prices[i] >= space.price_lo);
      CHECK(q.offer.prices[i] <= space.price_hi);
    }
  }
  space.price_hi = -1;
  CHECK_THROWS_AS(space.validate(), DataError);
  space = QuerySpace{};
  space.options = 0;
  CHECK_THROWS_AS(space.validate(), DataError);
}

TEST_CASE("synthesized queries beat random ones") {
  const Prior prior;
  MhConfig mh;
  mh.seed = 3;
  const auto samples = sample_posterior(simulate({0.7, 1.1, 0.5}, 5, 6), prior, 100, mh);
  const QuerySpace space;
  SynthesisConfig cfg;
  cfg.restarts = 50;
  cfg.seed = 2;
  const Query best = synthesize_query(samples, space, cfg);
  std::mt19937_64 rng(99);
  double random_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) random_best = std::min(random_best, query_objective(random_query(space, rng), samples));
  CHECK(query_objective(best, samples) <= random_best);
  CHECK(synthesize_query(samples, space, cfg) == best);

  const PopulationSamples same{std::vector<UserParams>(20, UserParams{1, 1, 1})};
  const Query one = synthesize_query(same, space, cfg);
  for (int i = 0; i < 100; ++i) CHECK(query_objective(one, same) <= query_objective(random_query(space, rng), same));
}

TEST_CASE("collapsed query space returns its only point") {
  QuerySpace space;
  space.options = 2;
  space.latency_lo = space.latency_hi = 2.0;
  space.price_lo = space.price_hi = 1.5;
  SynthesisConfig cfg;
  cfg.restarts = 5;
  const Query q = synthesize_query({{UserParams{1, 1, 1}}}, space, cfg);
  CHECK(q.offer.latencies == std::vector<double>{2.0, 2.0});
  CHECK(q.offer.prices == std::vector<double>{1.5, 1.5});
  CHECK(q.offer.alt_latency == 3.0);
  CHECK_THROWS_AS(synthesize_query({}, QuerySpace{}, cfg), DataError);
}

TEST_CASE("two clusters get a query that separates them") {
  // Time-sensitive and money-sensitive users.
  PopulationSamples s;
  for (int i = 0; i < 10; ++i) s.samples.push_back({2.0, 0.1, 0.5});
  for (int i = 0; i < 10; ++i) s.samples.push_back({0.1, 2.0, 0.5});
  SynthesisConfig cfg;
  cfg.restarts = 50;
  const Query q = synthesize_query(s, QuerySpace{}, cfg);
  auto argmax = [&](const UserParams& u) {
    const auto p = choice_probabilities(u, q.offer);
    return std::max_element(p.begin(), p.end()) - p.begin();
  };
  CHECK(argmax(s.samples.front()) != argmax(s.samples.back()));
}

TEST_CASE("simulated choices follow the logit model") {
  const UserParams u{0.5, 0.4, 0.3};
  const RouteOffer o = offer({1, 2, 3}, {3, 1, 0.5}, 4);
  const auto p = choice_probabilities(u, o);
  std::mt19937_64 rng(5);
  std::vector<double> counts(4, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[simulate_choice(u, o, rng)] += 1.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double se = std::sqrt(p[i] * (1 - p[i]) / n);
    CHECK(std::abs(counts[i] / n - p[i]) < 4 * se + 1e-12);
  }
}

TEST_CASE("summary") {
  const auto s = summarize({{UserParams{0, 1, 2}, UserParams{2, 1, 0}}});
  CHECK(s.mean == std::array<double, 3>{1, 1, 1});
  CHECK(s.variance == std::array<double, 3>{1, 0, 1});
  CHECK(s.trace_covariance == 2.0);
}

TEST_CASE("learning curve") {
  LearnSimConfig cfg;
  cfg.budget = 3;
  cfg.samples = 50;
  cfg.eval_samples = 50;
  cfg.mh.thinning = 5;
  cfg.synthesis.restarts = 5;
  cfg.seed = 21;
  const UserParams truth{1, 1, 1};
  const auto a = learning_curve(truth, true, cfg);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].query == i + 1);
    CHECK(a[i].mean_error >= 0);
    CHECK(a[i].trace_covariance > 0);
  }
  CHECK(learning_curve(truth, true, cfg) == a);
  CHECK(learning_curve(truth, false, cfg).size() == 3);
  CHECK_THROWS_AS(learning_curve({5, 1, 1}, true, cfg), DataError);
  cfg.budget = 0;
  CHECK_THROWS_AS(learning_curve(truth, true, cfg), DataError);
}
