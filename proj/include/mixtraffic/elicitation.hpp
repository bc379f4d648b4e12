#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtraffic/learning.hpp"

namespace mixtraffic::elicit {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kServiceVersion = "1.0.0";

enum class ErrorCode { not_found, no_pending_query, stale_query, out_of_range, dominated_choice, invalid_request };

class ElicitError : public std::runtime_error {
 public:
  ElicitError(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct SessionConfig {
  Prior prior;
  QuerySpace space;
  std::size_t samples = 100;
  MhConfig mh;
  SynthesisConfig synthesis;
  std::size_t budget = 10;
  /// When false every query is picked from `public_offers`, the menu all
  /// users may be shown.
  bool fairness_exempt = true;
  std::vector<RouteOffer> public_offers;
  /// Session seed; drawn at random when absent and recorded in the log.
  std::optional<std::uint64_t> seed;

  /// Throws DataError.
  void validate() const;
};

nlohmann::json to_json(const SessionConfig& cfg);
/// Missing keys keep the values of `defaults`.
SessionConfig config_from_json(const nlohmann::json& doc, const SessionConfig& defaults = {});

struct PendingQuery {
  std::string query_id;
  Query query;
  double objective = 0.0;

  bool operator==(const PendingQuery&) const = default;
};

/// Immutable snapshot of a session.
struct SessionState {
  std::string id;
  std::string label;
  SessionConfig config;
  std::uint64_t seed = 0;
  std::vector<ChoiceDatum> data;
  PopulationSamples samples;
  std::optional<PendingQuery> pending;
  std::size_t queries_issued = 0;
  std::uint64_t last_sequence = 0;
  std::string created;
  std::string updated;

  bool complete() const { return data.size() >= config.budget; }
};

/// Seeds of the chain run after `answered` choices and of the query issued
/// as number `index` (1-based).
std::uint64_t posterior_seed(std::uint64_t session_seed, std::size_t answered);
std::uint64_t query_seed(std::uint64_t session_seed, std::size_t index);

/// Field-wise comparison that skips the custom prior density handle.
bool same_state(const SessionState& a, const SessionState& b);

/// Sessions persisted as one append-only JSONL event log each under
/// `<data_dir>/sessions/`. Every mutation appends its events followed by a
/// commit record in a single write; replay drops a trailing uncommitted block.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path data_dir);

  std::shared_ptr<const SessionState> create_session(const std::string& label, const SessionConfig& cfg);
  std::shared_ptr<const SessionState> submit_choice(const std::string& id, const std::string& query_id,
                                                    std::size_t chosen);
  std::shared_ptr<const SessionState> get(const std::string& id) const;
  std::vector<std::string> session_ids() const;

  /// Pools posterior samples with equal weight per session as population JSONL.
  std::string export_population(const std::vector<std::string>& ids);

  std::filesystem::path log_path(const std::string& id) const;
  const std::filesystem::path& data_dir() const { return dir_; }

  /// Rebuilds a session from its event log.
  static SessionState replay(const std::filesystem::path& log);

 private:
  struct Slot {
    std::mutex writer;
    mutable std::mutex snapshot_guard;
    std::shared_ptr<const SessionState> snapshot;

    std::shared_ptr<const SessionState> load() const;
    void store(std::shared_ptr<const SessionState> s);
  };

  std::shared_ptr<Slot> slot(const std::string& id) const;
  void append(const std::string& id, SessionState& state, const std::vector<nlohmann::json>& events);

  std::filesystem::path dir_;
  mutable std::mutex map_guard_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace mixtraffic::elicit
