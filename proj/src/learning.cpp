#include "mixtraffic/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixtraffic/errors.hpp"
#include "mixtraffic/optim.hpp"

namespace mixtraffic {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t derive_seed(std::uint64_t base, std::uint32_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32), stream,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct PreparedDatum {
  const ChoiceDatum* datum;
  std::vector<bool> dominated;
};

std::vector<PreparedDatum> prepare(const std::vector<ChoiceDatum>& data) {
  std::vector<PreparedDatum> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    validate_datum(d);
    out.push_back({&d, dominated_mask(d.offer)});
  }
  return out;
}

double log_posterior(const UserParams& p, const std::vector<PreparedDatum>& data, const Prior& prior) {
  double lp = prior.log_prob(p);
  if (lp == kNegInf) return lp;
  for (const auto& d : data) lp += log_choice_probability(p, d.datum->offer, d.dominated, d.datum->chosen);
  return lp;
}

}  // namespace

void validate_datum(const ChoiceDatum& datum) {
  validate_offer(datum.offer);
  if (datum.chosen > datum.offer.routes()) throw DataError("chosen option out of range");
  if (datum.chosen > 0 && dominated_mask(datum.offer)[datum.chosen - 1]) {
    throw DataError("recorded choice of a dominated route");
  }
}

Prior Prior::uniform_box(std::array<double, 3> lower, std::array<double, 3> upper) {
  Prior p;
  p.lower = lower;
  p.upper = upper;
  p.validate();
  return p;
}

void Prior::validate() const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) throw DataError("prior bounds must be finite");
    if (lower[i] < 0.0) throw DataError("prior lower bounds must be nonnegative");
    if (lower[i] > upper[i]) throw DataError("prior lower bound exceeds upper bound");
  }
}

bool Prior::contains(const UserParams& p) const {
  const auto a = params_to_array(p);
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(a[i] >= lower[i] && a[i] <= upper[i])) return false;
  }
  return true;
}

double Prior::log_prob(const UserParams& p) const {
  if (!contains(p)) return kNegInf;
  if (log_density) return log_density(p);
  double lp = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (upper[i] > lower[i]) lp -= std::log(upper[i] - lower[i]);
  }
  return lp;
}

UserParams Prior::center() const {
  return {0.5 * (lower[0] + upper[0]), 0.5 * (lower[1] + upper[1]), 0.5 * (lower[2] + upper[2])};
}

UserParams params_from_array(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

std::array<double, 3> params_to_array(const UserParams& p) { return {p.omega1, p.omega2, p.zeta}; }

double log_choice_probability(const UserParams& params, const RouteOffer& offer,
                              const std::vector<bool>& dominated, std::size_t chosen) {
  const std::size_t n = offer.routes();
  if (chosen > 0 && dominated[chosen - 1]) return kNegInf;
  const double r0 = -params.zeta * offer.alt_latency;
  double top = r0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!dominated[i]) top = std::max(top, -params.omega1 * offer.latencies[i] - params.omega2 * offer.prices[i]);
  }
  double total = std::exp(r0 - top);
  for (std::size_t i = 0; i < n; ++i) {
    if (!dominated[i]) total += std::exp(-params.omega1 * offer.latencies[i] - params.omega2 * offer.prices[i] - top);
  }
  const double rc = chosen == 0 ? r0
                                : -params.omega1 * offer.latencies[chosen - 1] -
                                      params.omega2 * offer.prices[chosen - 1];
  return rc - top - std::log(total);
}

double log_posterior_unnorm(const UserParams& params, const std::vector<ChoiceDatum>& data,
                            const Prior& prior) {
  return log_posterior(params, prepare(data), prior);
}

PopulationSamples sample_posterior(const std::vector<ChoiceDatum>& data, const Prior& prior,
                                   std::size_t m, const MhConfig& cfg, MhDiagnostics* diag) {
  prior.validate();
  if (m < 1) throw DataError("sample count must be at least 1");
  std::size_t chain = 0;
  std::size_t burn = 0;
  std::size_t thin = 0;
  if (cfg.chain_length == 0) {
    if (cfg.thinning < 1) throw DataError("thinning must be at least 1");
    thin = cfg.thinning;
    const std::size_t kept = m * thin;
    chain = (kept * 5 + 3) / 4;
    burn = chain - kept;
  } else {
    if (cfg.chain_length <= cfg.burn_in) throw DataError("chain length must exceed burn-in");
    chain = cfg.chain_length;
    burn = cfg.burn_in;
    thin = (chain - burn) / m;
    if (thin < 1) throw DataError("chain too short for the requested sample count");
  }
  for (double s : cfg.proposal_scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DataError("proposal scale must be positive");
  }

  const auto prepared = prepare(data);
  std::array<double, 3> step{};
  for (std::size_t i = 0; i < 3; ++i) step[i] = cfg.proposal_scale[i] * (prior.upper[i] - prior.lower[i]);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::array<double, 3> x = params_to_array(prior.center());
  double lp = log_posterior(params_from_array(x), prepared, prior);
  PopulationSamples out;
  out.samples.reserve(m);
  std::size_t accepted = 0;
  for (std::size_t t = 0; t < chain && out.samples.size() < m; ++t) {
    std::array<double, 3> y = x;
    for (std::size_t i = 0; i < 3; ++i) {
      if (step[i] > 0.0) y[i] += step[i] * normal(rng);
    }
    const double u = unit(rng);
    const UserParams cand = params_from_array(y);
    if (prior.contains(cand)) {
      const double lq = log_posterior(cand, prepared, prior);
      if (lq != kNegInf && (lp == kNegInf || std::log(u) < lq - lp)) {
        x = y;
        lp = lq;
        ++accepted;
      }
    }
    if (t >= burn && (t - burn + 1) % thin == 0) out.samples.push_back(params_from_array(x));
  }
  if (diag) {
    diag->chain_length = chain;
    diag->burn_in = burn;
    diag->thinning = thin;
    diag->acceptance_rate = static_cast<double>(accepted) / static_cast<double>(chain);
  }
  return out;
}

void QuerySpace::validate() const {
  if (options < 1) throw DataError("query needs at least one priced option");
  if (!(latency_lo > 0.0) || latency_lo > latency_hi) throw DataError("latency range must be positive and ordered");
  if (!(price_lo >= 0.0) || price_lo > price_hi) throw DataError("price range must be nonnegative and ordered");
  if (!(alt_latency_lo > 0.0) || alt_latency_lo > alt_latency_hi) {
    throw DataError("alternative latency range must be positive and ordered");
  }
  for (double v : {latency_hi, price_hi, alt_latency_hi}) {
    if (!std::isfinite(v)) throw DataError("query space bounds must be finite");
  }
}

double query_objective(const Query& query, const PopulationSamples& samples) {
  if (samples.samples.empty()) throw DataError("query objective needs samples");
  const auto dominated = dominated_mask(query.offer);
  std::vector<double> sums(query.offer.routes() + 1, 0.0);
  for (const auto& s : samples.samples) {
    const auto p = choice_probabilities(s, query.offer, dominated);
    for (std::size_t i = 0; i < p.size(); ++i) sums[i] += p[i];
  }
  double obj = 0.0;
  for (double v : sums) obj += v * v;
  return obj;
}

Query random_query(const QuerySpace& space, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Query q;
  for (std::size_t i = 0; i < space.options; ++i) {
    q.offer.latencies.push_back(space.latency_lo + unit(rng) * (space.latency_hi - space.latency_lo));
    q.offer.prices.push_back(space.price_lo + unit(rng) * (space.price_hi - space.price_lo));
  }
  q.offer.alt_latency = space.alt_latency_lo + unit(rng) * (space.alt_latency_hi - space.alt_latency_lo);
  return q;
}

Query synthesize_query(const PopulationSamples& samples, const QuerySpace& space, const SynthesisConfig& cfg) {
  space.validate();
  if (samples.samples.empty()) throw DataError("query synthesis needs samples");
  if (cfg.restarts < 1) throw DataError("query synthesis needs at least one restart");
  const std::size_t n = space.options;
  const auto dim = static_cast<Eigen::Index>(2 * n + 1);
  const std::size_t m = samples.size();
  const double norm = 1.0 / (static_cast<double>(m) * static_cast<double>(m));

  // z in [0, 1]: latencies, then prices, then the decline latency.
  const double wl = space.latency_hi - space.latency_lo;
  const double wp = space.price_hi - space.price_lo;
  const double ww = space.alt_latency_hi - space.alt_latency_lo;
  auto to_offer = [&](const optim::Vector& z) {
    RouteOffer o;
    for (std::size_t i = 0; i < n; ++i) {
      o.latencies.push_back(space.latency_lo + z[static_cast<Eigen::Index>(i)] * wl);
      o.prices.push_back(space.price_lo + z[static_cast<Eigen::Index>(n + i)] * wp);
    }
    o.alt_latency = space.alt_latency_lo + z[dim - 1] * ww;
    return o;
  };
  optim::Bounds box{optim::Vector::Zero(dim), optim::Vector::Ones(dim)};
  for (std::size_t i = 0; i < n; ++i) {
    if (wl == 0.0) box.upper[static_cast<Eigen::Index>(i)] = 0.0;
    if (wp == 0.0) box.upper[static_cast<Eigen::Index>(n + i)] = 0.0;
  }
  if (ww == 0.0) box.upper[dim - 1] = 0.0;

  std::vector<bool> dominated;
  std::vector<double> probs(m * (n + 1));
  std::vector<double> sums(n + 1);
  auto objective = [&](const optim::Vector& z, optim::Vector& g) {
    const RouteOffer o = to_offer(z);
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t s = 0; s < m; ++s) {
      const auto p = choice_probabilities(samples.samples[s], o, dominated);
      std::copy(p.begin(), p.end(), probs.begin() + static_cast<std::ptrdiff_t>(s * (n + 1)));
      for (std::size_t i = 0; i <= n; ++i) sums[i] += p[i];
    }
    double obj = 0.0;
    for (double v : sums) obj += v * v;
    g.setZero();
    for (std::size_t s = 0; s < m; ++s) {
      const double* p = &probs[s * (n + 1)];
      double mix = 0.0;
      for (std::size_t i = 0; i <= n; ++i) mix += sums[i] * p[i];
      const auto& u = samples.samples[s];
      for (std::size_t j = 0; j <= n; ++j) {
        const double dr = 2.0 * p[j] * (sums[j] - mix) * norm;
        if (j == 0) {
          g[dim - 1] += dr * -u.zeta * ww;
        } else {
          g[static_cast<Eigen::Index>(j - 1)] += dr * -u.omega1 * wl;
          g[static_cast<Eigen::Index>(n + j - 1)] += dr * -u.omega2 * wp;
        }
      }
    }
    return obj * norm;
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  optim::LbfgsOptions opts;
  opts.max_iterations = cfg.max_iterations;
  opts.gradient_tolerance = 1e-8;

  Query best;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    optim::Vector z0(dim);
    for (Eigen::Index i = 0; i < dim; ++i) z0[i] = unit(rng);
    z0 = box.clamp(z0);
    dominated = dominated_mask(to_offer(z0));
    const auto res = optim::minimize_bounded(objective, z0, box, opts);
    Query q{to_offer(res.x)};
    const double value = query_objective(q, samples);
    if (value < best_value) {
      best_value = value;
      best = std::move(q);
    }
  }
  return best;
}

std::size_t simulate_choice(const UserParams& truth, const RouteOffer& offer, std::mt19937_64& rng) {
  const auto p = choice_probabilities(truth, offer);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

PosteriorSummary summarize(const PopulationSamples& samples) {
  PosteriorSummary s;
  if (samples.samples.empty()) return s;
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (const auto& u : samples.samples) {
    const auto a = params_to_array(u);
    for (std::size_t i = 0; i < 3; ++i) s.mean[i] += a[i] * inv;
  }
  for (const auto& u : samples.samples) {
    const auto a = params_to_array(u);
    for (std::size_t i = 0; i < 3; ++i) s.variance[i] += (a[i] - s.mean[i]) * (a[i] - s.mean[i]) * inv;
  }
  s.trace_covariance = s.variance[0] + s.variance[1] + s.variance[2];
  return s;
}

std::vector<CurveRow> learning_curve(const UserParams& truth, bool active, const LearnSimConfig& cfg) {
  cfg.prior.validate();
  cfg.space.validate();
  if (cfg.budget < 1) throw DataError("budget must be at least 1");
  if (!cfg.prior.contains(truth)) throw DataError("true parameters lie outside the prior support");

  std::mt19937_64 choice_rng(derive_seed(cfg.seed, 1, 0));
  std::mt19937_64 query_rng(derive_seed(cfg.seed, 2, 0));
  auto mh_for = [&](std::size_t step, std::uint32_t stream) {
    MhConfig mh = cfg.mh;
    mh.seed = derive_seed(cfg.seed, stream, step);
    return mh;
  };

  std::vector<ChoiceDatum> data;
  PopulationSamples samples = sample_posterior(data, cfg.prior, cfg.samples, mh_for(0, 3));
  std::vector<CurveRow> rows;
  const auto truth_a = params_to_array(truth);
  for (std::size_t t = 1; t <= cfg.budget; ++t) {
    Query q;
    if (active) {
      SynthesisConfig sc = cfg.synthesis;
      sc.seed = derive_seed(cfg.seed, 4, t);
      q = synthesize_query(samples, cfg.space, sc);
    } else {
      q = random_query(cfg.space, query_rng);
    }
    data.push_back({q.offer, simulate_choice(truth, q.offer, choice_rng)});
    samples = sample_posterior(data, cfg.prior, cfg.samples, mh_for(t, 3));
    const PopulationSamples eval = cfg.eval_samples == cfg.samples
                                       ? samples
                                       : sample_posterior(data, cfg.prior, cfg.eval_samples, mh_for(t, 5));
    const PosteriorSummary sum = summarize(eval);
    double err = 0.0;
    for (std::size_t i = 0; i < 3; ++i) err += (sum.mean[i] - truth_a[i]) * (sum.mean[i] - truth_a[i]);
    rows.push_back({t, std::sqrt(err), sum.trace_covariance});
  }
  return rows;
}

}  // namespace mixtraffic
