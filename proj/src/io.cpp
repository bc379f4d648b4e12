#include "mixtraffic/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mixtraffic/errors.hpp"

namespace mixtraffic::io {

namespace {

double number(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw DataError(std::string("missing field \"") + key + "\"");
  const json& v = doc.at(key);
  if (!v.is_number()) throw DataError(std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

std::vector<double> numbers(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw DataError(std::string("missing field \"") + key + "\"");
  const json& v = doc.at(key);
  if (!v.is_array()) throw DataError(std::string("field \"") + key + "\" must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw DataError(std::string("field \"") + key + "\" must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

json kappa_json(double kappa) { return std::isinf(kappa) ? json("inf") : json(kappa); }

double kappa_value(const json& v) {
  if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw DataError("kappa must be a number or \"inf\"");
  return v.get<double>();
}

template <typename F>
auto parse_lines(std::istream& in, F&& each) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      each(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(no) + ": " + e.what());
    }
  }
}

}  // namespace

json to_json(const RoadNetwork& network) {
  json roads = json::array();
  for (const Road& r : network.roads()) {
    roads.push_back({{"d", r.length},
                     {"v", r.speed},
                     {"b", r.lanes},
                     {"h_h", r.headway_human},
                     {"h_a", r.headway_auto},
                     {"n_bar", r.jam_density}});
  }
  return {{"roads", roads}};
}

RoadNetwork network_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("roads") || !doc["roads"].is_array()) {
    throw DataError("network document needs a \"roads\" array");
  }
  std::vector<Road> roads;
  for (const auto& r : doc["roads"]) {
    roads.push_back({number(r, "d"), number(r, "v"), number(r, "b"), number(r, "h_h"), number(r, "h_a"),
                     number(r, "n_bar")});
  }
  return RoadNetwork::checked(std::move(roads));
}

json to_json(const FlexibilityProfile& profile) {
  json levels = json::array();
  for (const auto& l : profile.levels()) levels.push_back({{"kappa", kappa_json(l.kappa)}, {"phi", l.phi}});
  return {{"levels", levels}};
}

FlexibilityProfile profile_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("levels") || !doc["levels"].is_array()) {
    throw DataError("profile document needs a \"levels\" array");
  }
  std::vector<FlexibilityLevel> levels;
  for (const auto& l : doc["levels"]) {
    if (!l.is_object() || !l.contains("kappa")) throw DataError("missing field \"kappa\"");
    levels.push_back({kappa_value(l["kappa"]), number(l, "phi")});
  }
  return FlexibilityProfile(std::move(levels));
}

json to_json(const Routing& routing) {
  json s = json::array();
  for (bool b : routing.congested) s.push_back(b ? 1 : 0);
  return {{"f_h", routing.human}, {"f_a", routing.autonomous}, {"s", s}};
}

Routing routing_from_json(const json& doc) {
  Routing r;
  r.human = numbers(doc, "f_h");
  r.autonomous = numbers(doc, "f_a");
  for (double v : numbers(doc, "s")) r.congested.push_back(v != 0.0);
  if (r.autonomous.size() != r.human.size() || r.congested.size() != r.human.size()) {
    throw DataError("routing vectors differ in length");
  }
  return r;
}

json to_json(const EquilibriumResult& result) {
  return {{"m_eq", result.m_eq},
          {"m_all", result.m_all},
          {"eq_latency", result.eq_latency},
          {"cost", result.cost},
          {"routing", to_json(result.routing)}};
}

EquilibriumResult equilibrium_from_json(const json& doc) {
  EquilibriumResult r;
  r.m_eq = static_cast<std::size_t>(number(doc, "m_eq"));
  r.m_all = static_cast<std::size_t>(number(doc, "m_all"));
  r.eq_latency = number(doc, "eq_latency");
  r.cost = number(doc, "cost");
  if (!doc.contains("routing")) throw DataError("missing field \"routing\"");
  r.routing = routing_from_json(doc["routing"]);
  return r;
}

json to_json(const UserParams& p) { return {{"omega1", p.omega1}, {"omega2", p.omega2}, {"zeta", p.zeta}}; }

UserParams params_from_json(const json& doc) {
  UserParams p{number(doc, "omega1"), number(doc, "omega2"), number(doc, "zeta")};
  if (!(p.omega1 >= 0.0 && p.omega2 >= 0.0 && p.zeta >= 0.0)) {
    throw DataError("reward parameters must be nonnegative");
  }
  return p;
}

json to_json(const RouteOffer& offer) {
  return {{"l", offer.latencies}, {"p", offer.prices}, {"l_w", offer.alt_latency}};
}

RouteOffer offer_from_json(const json& doc) {
  RouteOffer o;
  o.latencies = numbers(doc, "l");
  o.prices = numbers(doc, "p");
  o.alt_latency = number(doc, "l_w");
  validate_offer(o);
  return o;
}

json to_json(const ChoiceDatum& datum) { return {{"offer", to_json(datum.offer)}, {"chosen", datum.chosen}}; }

ChoiceDatum datum_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("offer")) throw DataError("missing field \"offer\"");
  ChoiceDatum d;
  d.offer = offer_from_json(doc["offer"]);
  const double chosen = number(doc, "chosen");
  if (chosen < 0.0 || chosen != std::floor(chosen)) throw DataError("chosen must be a nonnegative integer");
  d.chosen = static_cast<std::size_t>(chosen);
  validate_datum(d);
  return d;
}

json to_json(const PricingSolution& s) {
  const auto& d = s.diagnostics;
  json out = {{"k", s.k},
              {"objective", s.objective},
              {"profit", s.profit},
              {"prices", s.prices},
              {"q", s.q},
              {"routing", to_json(s.routing)},
              {"diagnostics",
               {{"restarts", d.restarts},
                {"accepted_restarts", d.accepted_restarts},
                {"best_restart", d.best_restart},
                {"max_residual", d.max_residual},
                {"inner_iterations", d.inner_iterations}}}};
  if (s.f_b) out["f_b"] = *s.f_b;
  return out;
}

PricingSolution solution_from_json(const json& doc) {
  PricingSolution s;
  s.k = static_cast<std::size_t>(number(doc, "k"));
  s.objective = number(doc, "objective");
  s.profit = number(doc, "profit");
  s.prices = numbers(doc, "prices");
  s.q = numbers(doc, "q");
  if (!doc.contains("routing")) throw DataError("missing field \"routing\"");
  s.routing = routing_from_json(doc["routing"]);
  if (doc.contains("f_b")) s.f_b = numbers(doc, "f_b");
  if (doc.contains("diagnostics")) {
    const json& d = doc["diagnostics"];
    s.diagnostics.restarts = static_cast<std::size_t>(number(d, "restarts"));
    s.diagnostics.accepted_restarts = static_cast<std::size_t>(number(d, "accepted_restarts"));
    s.diagnostics.best_restart = static_cast<std::size_t>(number(d, "best_restart"));
    s.diagnostics.max_residual = number(d, "max_residual");
    s.diagnostics.inner_iterations = static_cast<std::size_t>(number(d, "inner_iterations"));
  }
  return s;
}

PricingProblem problem_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object() || !doc.contains("network")) throw DataError("missing field \"network\"");
  PricingProblem p;
  p.network = network_from_json(doc["network"]);
  p.lambda_h = number(doc, "lambda_h");
  p.lambda_a = number(doc, "lambda_a");
  p.theta = number(doc, "theta");
  p.profit_floor = number(doc, "profit_floor");
  p.fuel_cost = number(doc, "fuel_cost");
  p.alt_latency = number(doc, "alt_latency");
  if (doc.contains("lambda_b") && !doc["lambda_b"].is_null()) p.uncontrolled_lambda_b = number(doc, "lambda_b");
  if (!doc.contains("population") || !doc["population"].is_string()) {
    throw DataError("field \"population\" must name a JSONL file");
  }
  std::filesystem::path pop = doc["population"].get<std::string>();
  if (pop.is_relative()) pop = base_dir / pop;
  p.population = read_population_file(pop);
  return p;
}

json problem_to_json(const PricingProblem& p, const std::string& population_path) {
  json out = {{"network", to_json(p.network)},
              {"lambda_h", p.lambda_h},
              {"lambda_a", p.lambda_a},
              {"theta", p.theta},
              {"profit_floor", p.profit_floor},
              {"fuel_cost", p.fuel_cost},
              {"alt_latency", p.alt_latency},
              {"population", population_path}};
  if (p.uncontrolled_lambda_b) out["lambda_b"] = *p.uncontrolled_lambda_b;
  return out;
}

std::string population_to_jsonl(const PopulationSamples& population) {
  std::string out;
  for (const auto& s : population.samples) out += to_json(s).dump() + "\n";
  return out;
}

PopulationSamples population_from_jsonl(std::istream& in) {
  PopulationSamples p;
  parse_lines(in, [&](const json& doc) { p.samples.push_back(params_from_json(doc)); });
  if (p.samples.empty()) throw DataError("population file holds no samples");
  return p;
}

std::vector<ChoiceDatum> choices_from_jsonl(std::istream& in) {
  std::vector<ChoiceDatum> data;
  parse_lines(in, [&](const json& doc) { data.push_back(datum_from_json(doc)); });
  return data;
}

std::string choices_to_jsonl(const std::vector<ChoiceDatum>& data) {
  std::string out;
  for (const auto& d : data) out += to_json(d).dump() + "\n";
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

PopulationSamples read_population_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open population file " + path.string());
  try {
    return population_from_jsonl(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mixtraffic::io
