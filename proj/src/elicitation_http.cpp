#include "mixtraffic/elicitation_http.hpp"

#include "mixtraffic/errors.hpp"
#include "mixtraffic/io.hpp"

namespace mixtraffic::elicit {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, json body) {
  body["schema_version"] = kSchemaVersion;
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void fail(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

int status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found:
      return 404;
    case ErrorCode::no_pending_query:
    case ErrorCode::stale_query:
      return 409;
    case ErrorCode::dominated_choice:
      return 422;
    case ErrorCode::out_of_range:
    case ErrorCode::invalid_request:
      return 400;
  }
  return 500;
}

const char* name_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found:
      return "not_found";
    case ErrorCode::no_pending_query:
      return "no_pending_query";
    case ErrorCode::stale_query:
      return "stale_query";
    case ErrorCode::out_of_range:
      return "out_of_range";
    case ErrorCode::dominated_choice:
      return "dominated_choice";
    case ErrorCode::invalid_request:
      return "invalid_request";
  }
  return "error";
}

template <typename F>
httplib::Server::Handler guarded(F&& body) {
  return [body = std::forward<F>(body)](const httplib::Request& req, httplib::Response& res) {
    try {
      body(req, res);
    } catch (const ElicitError& e) {
      fail(res, status_of(e.code()), name_of(e.code()), e.what());
    } catch (const json::exception& e) {
      fail(res, 400, "invalid_request", e.what());
    } catch (const DataError& e) {
      fail(res, 400, "invalid_request", e.what());
    } catch (const std::exception& e) {
      fail(res, 500, "internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json doc = json::parse(req.body);
  if (!doc.is_object()) throw ElicitError(ErrorCode::invalid_request, "request body must be a JSON object");
  return doc;
}

json query_view(const SessionState& s) {
  json out = {{"session_id", s.id}, {"answered", s.data.size()}, {"budget", s.config.budget}};
  if (!s.pending) {
    out["status"] = "complete";
    return out;
  }
  json options = json::array();
  const RouteOffer& o = s.pending->query.offer;
  for (std::size_t i = 0; i < o.routes(); ++i) {
    options.push_back({{"latency", o.latencies[i]}, {"price", o.prices[i]}});
  }
  out["status"] = "pending";
  out["query_id"] = s.pending->query_id;
  out["options"] = options;
  out["alt_latency"] = o.alt_latency;
  return out;
}

json session_view(const SessionState& s) {
  json out = {{"session_id", s.id},
              {"label", s.label},
              {"answered", s.data.size()},
              {"budget", s.config.budget},
              {"sample_count", s.samples.size()},
              {"fairness_exempt", s.config.fairness_exempt},
              {"last_sequence", s.last_sequence},
              {"created", s.created},
              {"updated", s.updated},
              {"query", query_view(s)}};
  return out;
}

json posterior_view(const SessionState& s) {
  const PosteriorSummary sum = summarize(s.samples);
  auto named = [](const std::array<double, 3>& a) {
    return json{{"omega1", a[0]}, {"omega2", a[1]}, {"zeta", a[2]}};
  };
  return {{"session_id", s.id},
          {"answered", s.data.size()},
          {"sample_count", s.samples.size()},
          {"mean", named(sum.mean)},
          {"variance", named(sum.variance)},
          {"trace_covariance", sum.trace_covariance},
          {"download", "/sessions/" + s.id + "/samples.jsonl"}};
}

}  // namespace

void register_routes(httplib::Server& server, SessionStore& store, const ServerOptions& options) {
  server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"version", kServiceVersion}});
  }));

  server.Post("/sessions", guarded([&store, defaults = options.defaults](const httplib::Request& req,
                                                                          httplib::Response& res) {
    const json body = parse_body(req);
    const std::string label = body.value("label", std::string());
    SessionConfig cfg = defaults;
    try {
      if (body.contains("config")) cfg = config_from_json(body["config"], defaults);
      cfg.validate();
    } catch (const DataError& e) {
      throw ElicitError(ErrorCode::invalid_request, e.what());
    }
    const auto s = store.create_session(label, cfg);
    reply(res, 201, session_view(*s));
  }));

  server.Get(R"(/sessions/([0-9a-f]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, session_view(*store.get(req.matches[1])));
  }));

  server.Get(R"(/sessions/([0-9a-f]+)/query)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               reply(res, 200, query_view(*store.get(req.matches[1])));
             }));

  server.Post(R"(/sessions/([0-9a-f]+)/choice)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                if (!body.contains("query_id") || !body["query_id"].is_string()) {
                  throw ElicitError(ErrorCode::invalid_request, "query_id is required");
                }
                if (!body.contains("chosen") || !body["chosen"].is_number_integer()) {
                  throw ElicitError(ErrorCode::invalid_request, "chosen must be an integer");
                }
                const auto chosen = body["chosen"].get<long long>();
                if (chosen < 0) throw ElicitError(ErrorCode::out_of_range, "chosen must be nonnegative");
                const auto s = store.submit_choice(req.matches[1], body["query_id"].get<std::string>(),
                                                   static_cast<std::size_t>(chosen));
                reply(res, 200, session_view(*s));
              }));

  server.Get(R"(/sessions/([0-9a-f]+)/posterior)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               reply(res, 200, posterior_view(*store.get(req.matches[1])));
             }));

  server.Get(R"(/sessions/([0-9a-f]+)/samples\.jsonl)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               res.set_header("X-Schema-Version", std::to_string(kSchemaVersion));
               res.set_content(io::population_to_jsonl(store.get(req.matches[1])->samples),
                               "application/x-ndjson");
             }));

  server.Post("/export", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    if (!body.contains("session_ids") || !body["session_ids"].is_array()) {
      throw ElicitError(ErrorCode::invalid_request, "session_ids must be an array");
    }
    const auto ids = body["session_ids"].get<std::vector<std::string>>();
    const std::string pooled = store.export_population(ids);
    res.set_header("X-Schema-Version", std::to_string(kSchemaVersion));
    res.set_content(pooled, "application/x-ndjson");
  }));

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) fail(res, res.status, res.status == 404 ? "not_found" : "error", "no such resource");
  });

  if (options.static_dir) server.set_mount_point("/", options.static_dir->string());
}

Server::Server(SessionStore& store, ServerOptions options) : store_(store), options_(std::move(options)) {
  // httplib defaults to SO_REUSEPORT, which lets a second server share a busy port.
  http_.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  register_routes(http_, store_, options_);
}

bool Server::bind() {
  if (options_.port == 0) {
    port_ = http_.bind_to_any_port(options_.host);
  } else {
    port_ = http_.bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  return port_ > 0;
}

void Server::run() { http_.listen_after_bind(); }

void Server::stop() { http_.stop(); }

}  // namespace mixtraffic::elicit
