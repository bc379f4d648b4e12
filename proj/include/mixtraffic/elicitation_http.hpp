#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <httplib.h>

#include "mixtraffic/elicitation.hpp"

namespace mixtraffic::elicit {

struct ServerOptions {
  std::string host = "127.0.0.1";
  /// 0 binds an ephemeral port.
  int port = 8080;
  /// Built front-end assets, mounted at "/".
  std::optional<std::filesystem::path> static_dir;
  /// Defaults for sessions created without an explicit config.
  SessionConfig defaults;
};

/// Routes:
///   GET  /health
///   POST /sessions                    {label, config?}
///   GET  /sessions/{id}
///   GET  /sessions/{id}/query
///   POST /sessions/{id}/choice        {query_id, chosen}
///   GET  /sessions/{id}/posterior
///   GET  /sessions/{id}/samples.jsonl
///   POST /export                      {session_ids}
void register_routes(httplib::Server& server, SessionStore& store, const ServerOptions& options);

class Server {
 public:
  Server(SessionStore& store, ServerOptions options);

  /// False when the address cannot be bound (for instance, port in use).
  bool bind();
  int port() const { return port_; }
  /// Blocks until stop().
  void run();
  void stop();

 private:
  SessionStore& store_;
  ServerOptions options_;
  httplib::Server http_;
  int port_ = -1;
};

}  // namespace mixtraffic::elicit
