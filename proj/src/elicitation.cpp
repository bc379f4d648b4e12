#include "mixtraffic/elicitation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>

#include "mixtraffic/errors.hpp"
#include "mixtraffic/io.hpp"

namespace mixtraffic::elicit {

using nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint32_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32), stream,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string now_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string random_hex() {
  std::random_device rd;
  const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) | rd();
}

std::array<double, 2> pair_of(const json& doc, const char* key, std::array<double, 2> fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc[key];
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw DataError(std::string("\"") + key + "\" must be a [lo, hi] pair");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

template <typename T>
T value_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field \"") + key + "\" has the wrong type");
  }
}

std::optional<PendingQuery> next_query(const SessionState& s) {
  if (s.complete()) return std::nullopt;
  const std::size_t index = s.queries_issued + 1;
  PendingQuery p;
  p.query_id = s.id + "-q" + std::to_string(index);
  if (s.config.fairness_exempt) {
    SynthesisConfig sc = s.config.synthesis;
    sc.seed = query_seed(s.seed, index);
    p.query = synthesize_query(s.samples, s.config.space, sc);
    p.objective = query_objective(p.query, s.samples);
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& offer : s.config.public_offers) {
      const Query q{offer};
      const double v = query_objective(q, s.samples);
      if (v < best) {
        best = v;
        p.query = q;
        p.objective = v;
      }
    }
  }
  return p;
}

PopulationSamples resample(const SessionState& s) {
  MhConfig mh = s.config.mh;
  mh.seed = posterior_seed(s.seed, s.data.size());
  return sample_posterior(s.data, s.config.prior, s.config.samples, mh);
}

void issue(SessionState& s) {
  s.pending = next_query(s);
  if (s.pending) ++s.queries_issued;
}

void start(SessionState& s) {
  s.samples = resample(s);
  issue(s);
}

void apply_choice(SessionState& s, std::size_t chosen) {
  const RouteOffer& offer = s.pending->query.offer;
  if (chosen > offer.routes()) {
    throw ElicitError(ErrorCode::out_of_range, "choice " + std::to_string(chosen) + " outside [0, " +
                                                   std::to_string(offer.routes()) + "]");
  }
  if (chosen > 0 && dominated_mask(offer)[chosen - 1]) {
    throw ElicitError(ErrorCode::dominated_choice, "route " + std::to_string(chosen) + " is dominated");
  }
  s.data.push_back({offer, chosen});
  s.samples = resample(s);
  issue(s);
}

json summary_payload(const SessionState& s) {
  const PosteriorSummary sum = summarize(s.samples);
  return {{"answered", s.data.size()},
          {"seed", posterior_seed(s.seed, s.data.size())},
          {"sample_count", s.samples.size()},
          {"mean", sum.mean},
          {"trace_covariance", sum.trace_covariance}};
}

json query_payload(const PendingQuery& p) {
  return {{"query_id", p.query_id}, {"offer", io::to_json(p.query.offer)}, {"objective", p.objective}};
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw std::runtime_error("cannot open event log " + path.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw std::runtime_error("cannot append to event log: " + std::string(std::strerror(err)));
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

void SessionConfig::validate() const {
  prior.validate();
  space.validate();
  if (samples < 1) throw DataError("samples must be at least 1");
  if (budget < 1) throw DataError("budget must be at least 1");
  if (synthesis.restarts < 1) throw DataError("synthesis restarts must be at least 1");
  if (mh.chain_length == 0 && mh.thinning < 1) throw DataError("thinning must be at least 1");
  if (!fairness_exempt && public_offers.empty()) {
    throw DataError("fairness mode needs at least one public offer");
  }
  for (const auto& o : public_offers) validate_offer(o);
}

json to_json(const SessionConfig& c) {
  json offers = json::array();
  for (const auto& o : c.public_offers) offers.push_back(io::to_json(o));
  json out = {{"prior", {{"lower", c.prior.lower}, {"upper", c.prior.upper}}},
              {"space",
               {{"options", c.space.options},
                {"latency", {c.space.latency_lo, c.space.latency_hi}},
                {"price", {c.space.price_lo, c.space.price_hi}},
                {"alt_latency", {c.space.alt_latency_lo, c.space.alt_latency_hi}}}},
              {"samples", c.samples},
              {"mh",
               {{"chain_length", c.mh.chain_length},
                {"burn_in", c.mh.burn_in},
                {"thinning", c.mh.thinning},
                {"proposal_scale", c.mh.proposal_scale}}},
              {"synthesis", {{"restarts", c.synthesis.restarts}, {"max_iterations", c.synthesis.max_iterations}}},
              {"budget", c.budget},
              {"fairness_exempt", c.fairness_exempt},
              {"public_offers", offers}};
  if (c.seed) out["seed"] = *c.seed;
  return out;
}

SessionConfig config_from_json(const json& doc, const SessionConfig& defaults) {
  if (!doc.is_object()) throw DataError("session config must be an object");
  SessionConfig c = defaults;
  if (doc.contains("prior")) {
    const json& p = doc["prior"];
    c.prior.lower = value_or(p, "lower", c.prior.lower);
    c.prior.upper = value_or(p, "upper", c.prior.upper);
  }
  if (doc.contains("space")) {
    const json& s = doc["space"];
    c.space.options = value_or(s, "options", c.space.options);
    const auto l = pair_of(s, "latency", {c.space.latency_lo, c.space.latency_hi});
    const auto p = pair_of(s, "price", {c.space.price_lo, c.space.price_hi});
    const auto w = pair_of(s, "alt_latency", {c.space.alt_latency_lo, c.space.alt_latency_hi});
    c.space.latency_lo = l[0];
    c.space.latency_hi = l[1];
    c.space.price_lo = p[0];
    c.space.price_hi = p[1];
    c.space.alt_latency_lo = w[0];
    c.space.alt_latency_hi = w[1];
  }
  c.samples = value_or(doc, "samples", c.samples);
  if (doc.contains("mh")) {
    const json& m = doc["mh"];
    c.mh.chain_length = value_or(m, "chain_length", c.mh.chain_length);
    c.mh.burn_in = value_or(m, "burn_in", c.mh.burn_in);
    c.mh.thinning = value_or(m, "thinning", c.mh.thinning);
    c.mh.proposal_scale = value_or(m, "proposal_scale", c.mh.proposal_scale);
  }
  if (doc.contains("synthesis")) {
    const json& s = doc["synthesis"];
    c.synthesis.restarts = value_or(s, "restarts", c.synthesis.restarts);
    c.synthesis.max_iterations = value_or(s, "max_iterations", c.synthesis.max_iterations);
  }
  c.budget = value_or(doc, "budget", c.budget);
  c.fairness_exempt = value_or(doc, "fairness_exempt", c.fairness_exempt);
  if (doc.contains("public_offers")) {
    c.public_offers.clear();
    for (const auto& o : doc["public_offers"]) c.public_offers.push_back(io::offer_from_json(o));
  }
  if (doc.contains("seed") && !doc["seed"].is_null()) c.seed = value_or<std::uint64_t>(doc, "seed", 0);
  c.validate();
  return c;
}

std::uint64_t posterior_seed(std::uint64_t session_seed, std::size_t answered) {
  return mix_seed(session_seed, 3, answered);
}

std::uint64_t query_seed(std::uint64_t session_seed, std::size_t index) {
  return mix_seed(session_seed, 4, index);
}

bool same_state(const SessionState& a, const SessionState& b) {
  return a.id == b.id && a.label == b.label && to_json(a.config) == to_json(b.config) && a.seed == b.seed &&
         a.data == b.data && a.samples == b.samples && a.pending == b.pending &&
         a.queries_issued == b.queries_issued && a.last_sequence == b.last_sequence && a.created == b.created &&
         a.updated == b.updated;
}

std::shared_ptr<const SessionState> SessionStore::Slot::load() const {
  std::lock_guard lock(snapshot_guard);
  return snapshot;
}

void SessionStore::Slot::store(std::shared_ptr<const SessionState> s) {
  std::lock_guard lock(snapshot_guard);
  snapshot = std::move(s);
}

SessionStore::SessionStore(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
  std::filesystem::create_directories(dir_ / "sessions");
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(dir_ / "sessions")) {
    if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& log : logs) {
    SessionState state = replay(log);
    if (state.id.empty()) continue;
    auto slot = std::make_shared<Slot>();
    const std::string id = state.id;
    slot->store(std::make_shared<const SessionState>(std::move(state)));
    slots_[id] = std::move(slot);
  }
}

std::filesystem::path SessionStore::log_path(const std::string& id) const {
  return dir_ / "sessions" / (id + ".jsonl");
}

std::shared_ptr<SessionStore::Slot> SessionStore::slot(const std::string& id) const {
  std::lock_guard lock(map_guard_);
  const auto it = slots_.find(id);
  if (it == slots_.end()) throw ElicitError(ErrorCode::not_found, "unknown session " + id);
  return it->second;
}

void SessionStore::append(const std::string& id, SessionState& state, const std::vector<json>& events) {
  const std::string ts = now_utc();
  const std::uint64_t txn = state.last_sequence + 1;
  std::string block;
  std::uint64_t seq = state.last_sequence;
  for (const auto& e : events) {
    json line = {{"seq", ++seq}, {"txn", txn}, {"kind", e.at("kind")}, {"session", id}, {"ts", ts},
                 {"payload", e.at("payload")}};
    block += line.dump() + "\n";
  }
  block += json{{"seq", ++seq}, {"txn", txn}, {"kind", "commit"}, {"session", id}, {"ts", ts}}.dump() + "\n";
  write_all(log_path(id), block);
  state.last_sequence = seq;
  state.updated = ts;
  if (state.created.empty()) state.created = ts;
}

std::shared_ptr<const SessionState> SessionStore::create_session(const std::string& label,
                                                                 const SessionConfig& cfg) {
  cfg.validate();
  SessionState s;
  {
    std::lock_guard lock(map_guard_);
    do {
      s.id = random_hex();
    } while (slots_.count(s.id) > 0 || std::filesystem::exists(log_path(s.id)));
    slots_[s.id] = std::make_shared<Slot>();
  }
  auto sl = slot(s.id);
  std::lock_guard writer(sl->writer);
  try {
    s.label = label;
    s.config = cfg;
    s.seed = cfg.seed.value_or(random_seed());
    start(s);
    std::vector<json> events{
        {{"kind", "session-created"}, {"payload", {{"label", label}, {"config", to_json(cfg)}, {"seed", s.seed}}}},
        {{"kind", "posterior-updated"}, {"payload", summary_payload(s)}}};
    if (s.pending) events.push_back({{"kind", "query-issued"}, {"payload", query_payload(*s.pending)}});
    append(s.id, s, events);
  } catch (...) {
    std::lock_guard lock(map_guard_);
    slots_.erase(s.id);
    throw;
  }
  auto snap = std::make_shared<const SessionState>(std::move(s));
  sl->store(snap);
  return snap;
}

std::shared_ptr<const SessionState> SessionStore::submit_choice(const std::string& id, const std::string& query_id,
                                                                std::size_t chosen) {
  auto sl = slot(id);
  std::lock_guard writer(sl->writer);
  const auto current = sl->load();
  if (!current->pending) throw ElicitError(ErrorCode::no_pending_query, "session has no pending query");
  if (current->pending->query_id != query_id) {
    throw ElicitError(ErrorCode::stale_query,
                      "query " + query_id + " is not the pending query " + current->pending->query_id);
  }
  SessionState next = *current;
  apply_choice(next, chosen);
  std::vector<json> events{
      {{"kind", "choice-recorded"}, {"payload", {{"query_id", query_id}, {"chosen", chosen}}}},
      {{"kind", "posterior-updated"}, {"payload", summary_payload(next)}}};
  if (next.pending) events.push_back({{"kind", "query-issued"}, {"payload", query_payload(*next.pending)}});
  append(id, next, events);
  auto snap = std::make_shared<const SessionState>(std::move(next));
  sl->store(snap);
  return snap;
}

std::shared_ptr<const SessionState> SessionStore::get(const std::string& id) const { return slot(id)->load(); }

std::vector<std::string> SessionStore::session_ids() const {
  std::lock_guard lock(map_guard_);
  std::vector<std::string> out;
  for (const auto& [id, _] : slots_) out.push_back(id);
  return out;
}

std::string SessionStore::export_population(const std::vector<std::string>& ids) {
  if (ids.empty()) throw ElicitError(ErrorCode::invalid_request, "no sessions selected for export");
  std::vector<std::shared_ptr<Slot>> slots;
  std::vector<std::shared_ptr<const SessionState>> states;
  for (const auto& id : ids) {
    slots.push_back(slot(id));
    states.push_back(slots.back()->load());
  }
  std::size_t per = states.front()->samples.size();
  for (const auto& s : states) per = std::min(per, s->samples.size());
  PopulationSamples pooled;
  for (const auto& s : states) {
    // Evenly strided subsample keeps every session at equal weight.
    const std::size_t m = s->samples.size();
    for (std::size_t j = 0; j < per; ++j) pooled.samples.push_back(s->samples.samples[j * m / per]);
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::lock_guard writer(slots[i]->writer);
    SessionState next = *slots[i]->load();
    append(ids[i], next, {{{"kind", "exported"}, {"payload", {{"sessions", ids}, {"samples_each", per}}}}});
    slots[i]->store(std::make_shared<const SessionState>(std::move(next)));
  }
  return io::population_to_jsonl(pooled);
}

SessionState SessionStore::replay(const std::filesystem::path& log) {
  std::ifstream in(log);
  if (!in) throw DataError("cannot open event log " + log.string());
  std::vector<json> lines;
  std::string text;
  while (std::getline(in, text)) {
    if (text.empty()) continue;
    try {
      lines.push_back(json::parse(text));
    } catch (const json::exception&) {
      if (in.peek() != std::char_traits<char>::eof()) throw DataError("corrupt event log " + log.string());
      break;  // torn final write
    }
  }

  SessionState s;
  std::vector<json> block;
  std::uint64_t block_txn = 0;
  std::uint64_t max_seq = 0;
  auto apply_block = [&](const std::string& ts) {
    for (const auto& e : block) {
      const std::string kind = e.at("kind");
      const json& payload = e.at("payload");
      if (kind == "session-created") {
        s.id = e.at("session");
        s.label = payload.at("label");
        s.config = config_from_json(payload.at("config"));
        s.seed = payload.at("seed");
        s.created = ts;
        start(s);
      } else if (kind == "choice-recorded") {
        if (!s.pending || s.pending->query_id != payload.at("query_id").get<std::string>()) {
          throw DataError("event log records a choice for a query that was not pending");
        }
        apply_choice(s, payload.at("chosen").get<std::size_t>());
      }
    }
    s.updated = ts;
  };
  for (const auto& e : lines) {
    const std::uint64_t seq = e.at("seq");
    if (seq <= max_seq) throw DataError("event log sequence numbers must increase");
    max_seq = seq;
    const std::uint64_t txn = e.at("txn");
    if (txn != block_txn) {
      block.clear();  // earlier block never committed
      block_txn = txn;
    }
    if (e.at("kind") == "commit") {
      apply_block(e.at("ts"));
      s.last_sequence = seq;
      block.clear();
      block_txn = 0;
    } else {
      block.push_back(e);
    }
  }
  if (max_seq > s.last_sequence) s.last_sequence = max_seq;
  return s;
}

}  // namespace mixtraffic::elicit
