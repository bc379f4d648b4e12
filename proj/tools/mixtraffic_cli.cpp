#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mixtraffic/elicitation.hpp"
#include "mixtraffic/elicitation_http.hpp"
#include "mixtraffic/equilibria.hpp"
#include "mixtraffic/errors.hpp"
#include "mixtraffic/io.hpp"
#include "mixtraffic/learning.hpp"
#include "mixtraffic/pricing.hpp"
#include "mixtraffic/report.hpp"

namespace fs = std::filesystem;
using namespace mixtraffic;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kInfeasible = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<fs::path> config;

  json config_doc() const { return config ? io::read_json_file(*config) : json::object(); }
};

std::uint64_t require_seed(const Globals& g, const json& cfg) {
  if (g.seed) return *g.seed;
  if (cfg.contains("seed") && cfg["seed"].is_number_unsigned()) return cfg["seed"].get<std::uint64_t>();
  throw DataError("this subcommand is stochastic: pass --seed or set \"seed\" in the config file");
}

void emit(const Globals& g, const std::string& name, const std::string& content) {
  if (g.out) io::write_file(*g.out / name, content);
}

void print_violations(const ValidationError& e) {
  std::cerr << "error: " << e.what() << "\n";
  for (const auto& v : e.violations()) std::cerr << "  [" << v.kind << "] " << v.message << "\n";
}

// Maps library errors onto exit codes.
template <typename F>
int run_guarded(F&& body) {
  try {
    return body();
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ValidationError& e) {
    print_violations(e);
    return kBadInput;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }
}

struct EqArgs {
  fs::path network;
  fs::path profile;
  double lambda_h = 0.0;
  double lambda_a = 0.0;
};

int cmd_equilibrium(const Globals& g, const EqArgs& a, bool flexible) {
  const RoadNetwork net = io::network_from_json(io::read_json_file(a.network));
  if (a.lambda_h < 0.0 || a.lambda_a < 0.0) throw DataError("demands must be nonnegative");
  const DemandSpec demand{a.lambda_h, a.lambda_a};
  EquilibriumResult res;
  if (flexible) {
    res = solve_bfne(net, demand, io::profile_from_json(io::read_json_file(a.profile)));
  } else {
    res = solve_bne(net, demand);
  }
  const std::string doc = io::to_json(res).dump(2) + "\n";
  std::cout << doc;
  std::cerr << report::equilibrium_table(net, res);
  emit(g, flexible ? "bfne.json" : "bne.json", doc);
  return kOk;
}

struct PriceArgs {
  fs::path problem;
  std::optional<fs::path> profile;
  std::optional<std::size_t> restarts;
};

json comparison_row(const PricingProblem& p, const PricingSolution& s, const std::optional<fs::path>& profile) {
  double served = 0.0;
  for (double v : s.routing.autonomous) served += v;
  if (s.f_b) {
    for (double v : *s.f_b) served += v;
  }
  json row = {{"pricing", {{"objective", s.objective}, {"served_autonomous", served}}}};
  const DemandSpec demand{p.lambda_h, served};
  auto eq_entry = [&](const EquilibriumResult& r) {
    return json{{"m_eq", r.m_eq},
                {"m_all", r.m_all},
                {"cost", r.cost},
                {"objective", social_objective(p.network, r.routing, p.theta)}};
  };
  try {
    row["bne"] = eq_entry(solve_bne(p.network, demand));
  } catch (const InfeasibleError& e) {
    row["bne"] = {{"infeasible", e.what()}};
  }
  if (profile) {
    try {
      row["bfne"] = eq_entry(solve_bfne(p.network, demand, io::profile_from_json(io::read_json_file(*profile))));
    } catch (const InfeasibleError& e) {
      row["bfne"] = {{"infeasible", e.what()}};
    }
  }
  if (const auto base = all_decline_baseline(p)) {
    row["all_decline"] = {{"objective", base->objective}};
  } else {
    row["all_decline"] = nullptr;
  }
  return row;
}

int cmd_price(const Globals& g, const PriceArgs& a) {
  const json cfg_doc = g.config_doc();
  const PricingProblem problem = io::problem_from_json(io::read_json_file(a.problem), a.problem.parent_path());
  PricingConfig cfg;
  cfg.seed = require_seed(g, cfg_doc);
  cfg.restarts = cfg_doc.value("restarts", cfg.restarts);
  cfg.constraint_tolerance = cfg_doc.value("constraint_tolerance", cfg.constraint_tolerance);
  cfg.optimality_tolerance = cfg_doc.value("optimality_tolerance", cfg.optimality_tolerance);
  cfg.max_iterations = cfg_doc.value("max_iterations", cfg.max_iterations);
  if (a.restarts) cfg.restarts = *a.restarts;
  if (cfg.restarts < 1) throw DataError("restarts must be at least 1");

  const PricingSolution sol = problem.uncontrolled_lambda_b ? solve_pricing_partial_control(problem, cfg)
                                                            : solve_pricing(problem, cfg);
  const json row = comparison_row(problem, sol, a.profile);
  const json doc = {{"solution", io::to_json(sol)}, {"comparison", row}};
  const std::string text = doc.dump(2) + "\n";
  std::cout << text;
  std::cerr << "objective " << sol.objective << "  k " << sol.k << "  profit " << sol.profit;
  if (row["all_decline"].is_object()) std::cerr << "  all-decline " << row["all_decline"]["objective"];
  if (row["bne"].contains("objective")) std::cerr << "  bne " << row["bne"]["objective"];
  std::cerr << "\n";
  emit(g, "solution.json", text);
  return kOk;
}

struct LearnArgs {
  fs::path truth;
  std::size_t budget = 10;
  std::size_t replicates = 1;
  std::optional<std::size_t> restarts;
};

int cmd_learn_sim(const Globals& g, const LearnArgs& a) {
  const json cfg_doc = g.config_doc();
  const std::uint64_t seed = require_seed(g, cfg_doc);
  if (a.budget < 1) throw DataError("budget must be at least 1");
  if (a.replicates < 1) throw DataError("replicates must be at least 1");
  const PopulationSamples truths = io::read_population_file(a.truth);

  elicit::SessionConfig base;
  base.synthesis.restarts = 50;
  const elicit::SessionConfig sc = elicit::config_from_json(cfg_doc, base);
  LearnSimConfig cfg;
  cfg.prior = sc.prior;
  cfg.space = sc.space;
  cfg.samples = sc.samples;
  cfg.eval_samples = cfg_doc.value("eval_samples", sc.samples);
  cfg.mh = sc.mh;
  cfg.synthesis = sc.synthesis;
  if (a.restarts) cfg.synthesis.restarts = *a.restarts;
  cfg.budget = a.budget;

  const std::string header = "user,replicate,query,mean_error,trace_covariance\n";
  std::string active_csv = header;
  std::string random_csv = header;
  std::size_t wins = 0;
  std::size_t runs = 0;
  char line[160];
  for (std::size_t u = 0; u < truths.size(); ++u) {
    for (std::size_t r = 0; r < a.replicates; ++r) {
      cfg.seed = seed + 1000003ULL * u + r;
      const auto act = learning_curve(truths.samples[u], true, cfg);
      const auto rnd = learning_curve(truths.samples[u], false, cfg);
      for (const auto& row : act) {
        std::snprintf(line, sizeof line, "%zu,%zu,%zu,%.10g,%.10g\n", u + 1, r + 1, row.query, row.mean_error,
                      row.trace_covariance);
        active_csv += line;
      }
      for (const auto& row : rnd) {
        std::snprintf(line, sizeof line, "%zu,%zu,%zu,%.10g,%.10g\n", u + 1, r + 1, row.query, row.mean_error,
                      row.trace_covariance);
        random_csv += line;
      }
      wins += act.back().trace_covariance < rnd.back().trace_covariance ? 1 : 0;
      ++runs;
    }
  }
  const json summary = {{"runs", runs},
                        {"active_lower_trace", wins},
                        {"fraction", static_cast<double>(wins) / static_cast<double>(runs)},
                        {"budget", a.budget},
                        {"seed", seed}};
  const fs::path out = g.out.value_or(fs::path("."));
  io::write_file(out / "active.csv", active_csv);
  io::write_file(out / "random.csv", random_csv);
  io::write_file(out / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

struct ServeArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::optional<fs::path> data_dir;
  std::optional<fs::path> static_dir;
};

elicit::Server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Globals& g, const ServeArgs& a) {
  fs::path dir;
  if (a.data_dir) {
    dir = *a.data_dir;
  } else if (const char* env = std::getenv("ELICIT_DATA_DIR")) {
    dir = env;
  } else {
    dir = g.out.value_or(fs::path("elicit-data"));
  }
  elicit::ServerOptions opts;
  opts.host = a.host;
  opts.port = a.port;
  opts.static_dir = a.static_dir;
  const json cfg_doc = g.config_doc();
  opts.defaults = elicit::config_from_json(cfg_doc.value("session", json::object()));

  elicit::SessionStore store(dir);
  elicit::Server server(store, opts);
  if (!server.bind()) {
    std::cerr << "error: cannot listen on " << a.host << ":" << a.port << "\n";
    return kBadInput;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving on http://" << a.host << ":" << server.port() << " (data in " << dir.string() << ")\n";
  server.run();
  g_server = nullptr;
  std::cerr << "stopped\n";
  return kOk;
}

struct ReportArgs {
  fs::path network;
  std::optional<fs::path> profile;
  double lambda_h = 0.0;
  double lambda_a = 0.0;
};

int cmd_report(const Globals& g, const ReportArgs& a) {
  if (!g.out) throw DataError("report needs --out");
  const RoadNetwork net = io::network_from_json(io::read_json_file(a.network));
  const std::vector<double> alphas{0.0, 0.5, 1.0};
  auto write_chart = [&](const std::string& stem, const report::Chart& c) {
    io::write_file(*g.out / (stem + ".svg"), report::to_svg(c));
    io::write_file(*g.out / (stem + ".csv"), report::to_csv(c));
  };
  for (std::size_t i = 0; i < net.size(); ++i) {
    const std::string tag = "road" + std::to_string(i + 1);
    write_chart("fundamental_" + tag, report::fundamental_diagram(net[i], alphas));
    write_chart("flow_latency_" + tag, report::flow_latency(net[i], alphas));
  }
  if (a.lambda_h > 0.0 || a.lambda_a > 0.0) {
    const DemandSpec demand{a.lambda_h, a.lambda_a};
    try {
      write_chart("equilibrium_bne", report::equilibrium_diagram(net, solve_bne(net, demand), "Best Nash equilibrium"));
    } catch (const InfeasibleError& e) {
      std::cerr << "bne skipped: " << e.what() << "\n";
    }
    if (a.profile) {
      const auto prof = io::profile_from_json(io::read_json_file(*a.profile));
      try {
        write_chart("equilibrium_bfne",
                    report::equilibrium_diagram(net, solve_bfne(net, demand, prof), "Best flexible Nash equilibrium"));
      } catch (const InfeasibleError& e) {
        std::cerr << "bfne skipped: " << e.what() << "\n";
      }
    }
  }
  std::cout << "wrote report to " << g.out->string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pricing and routing for mixed-autonomy parallel road networks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for stochastic subcommands");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--config", g.config, "JSON config with solver overrides")->check(CLI::ExistingFile);

  EqArgs bne_args;
  auto* bne = app.add_subcommand("bne", "Best Nash equilibrium");
  bne->add_option("--network", bne_args.network, "Network JSON")->required();
  bne->add_option("--lambda-h", bne_args.lambda_h, "Human flow demand")->required();
  bne->add_option("--lambda-a", bne_args.lambda_a, "Autonomous flow demand")->required();

  EqArgs bfne_args;
  auto* bfne = app.add_subcommand("bfne", "Best flexible Nash equilibrium");
  bfne->add_option("--network", bfne_args.network, "Network JSON")->required();
  bfne->add_option("--profile", bfne_args.profile, "Flexibility profile JSON")->required();
  bfne->add_option("--lambda-h", bfne_args.lambda_h, "Human flow demand")->required();
  bfne->add_option("--lambda-a", bfne_args.lambda_a, "Autonomous flow demand")->required();

  PriceArgs price_args;
  auto* price = app.add_subcommand("price", "Solve the pricing problem");
  price->add_option("--problem", price_args.problem, "Problem JSON")->required();
  price->add_option("--profile", price_args.profile, "Flexibility profile for the comparison row");
  price->add_option("--restarts", price_args.restarts, "Restarts per branch");

  LearnArgs learn_args;
  auto* learn = app.add_subcommand("learn-sim", "Simulated active vs random preference learning");
  learn->add_option("--truth", learn_args.truth, "JSONL of true user parameters")->required();
  learn->add_option("--budget", learn_args.budget, "Queries per user");
  learn->add_option("--replicates", learn_args.replicates, "Seeds per user");
  learn->add_option("--restarts", learn_args.restarts, "Query synthesis restarts");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the elicitation service");
  serve->add_option("--port", serve_args.port, "Listen port (0 picks one)");
  serve->add_option("--host", serve_args.host, "Listen address");
  serve->add_option("--data-dir", serve_args.data_dir, "Event log directory (default $ELICIT_DATA_DIR)");
  serve->add_option("--static", serve_args.static_dir, "Front-end assets to serve at /");

  ReportArgs report_args;
  auto* rep = app.add_subcommand("report", "Emit SVG/CSV diagrams");
  rep->add_option("--network", report_args.network, "Network JSON")->required();
  rep->add_option("--profile", report_args.profile, "Flexibility profile JSON");
  rep->add_option("--lambda-h", report_args.lambda_h, "Human flow demand");
  rep->add_option("--lambda-a", report_args.lambda_a, "Autonomous flow demand");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  return run_guarded([&] {
    if (bne->parsed()) return cmd_equilibrium(g, bne_args, false);
    if (bfne->parsed()) return cmd_equilibrium(g, bfne_args, true);
    if (price->parsed()) return cmd_price(g, price_args);
    if (learn->parsed()) return cmd_learn_sim(g, learn_args);
    if (serve->parsed()) return cmd_serve(g, serve_args);
    return cmd_report(g, report_args);
  });
}
