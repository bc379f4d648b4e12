#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "mixtraffic/errors.hpp"
#include "mixtraffic/io.hpp"

using namespace mixtraffic;
using nlohmann::json;

TEST_CASE("network round trip") {
  const RoadNetwork net = fixture::desk_network3();
  const RoadNetwork back = io::network_from_json(io::to_json(net));
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == net[i]);

  CHECK_THROWS_AS(io::network_from_json(json::object()), DataError);
  CHECK_THROWS_AS(io::network_from_json(json{{"roads", {{{"d", 1}}}}}), DataError);
  json bad = io::to_json(net);
  bad["roads"][0]["v"] = "fast";
  CHECK_THROWS_AS(io::network_from_json(bad), DataError);
  json unordered = io::to_json(RoadNetwork({fixture::road(2, 1, 1), fixture::road(1, 1, 1)}));
  CHECK_THROWS_AS(io::network_from_json(unordered), ValidationError);
}

TEST_CASE("profile round trip keeps infinite levels") {
  const FlexibilityProfile p({{1.2, 0.3}, {2.0, 1.0}});
  const auto back = io::profile_from_json(io::to_json(p));
  REQUIRE(back.levels().size() == 2);
  CHECK(back.levels()[1].kappa == 2.0);
  CHECK(back.levels()[0].phi == 0.3);

  const json inf = {{"levels", {{{"kappa", "inf"}, {"phi", 1.0}}}}};
  CHECK(std::isinf(io::profile_from_json(inf).levels()[0].kappa));
  CHECK(io::to_json(io::profile_from_json(inf))["levels"][0]["kappa"] == "inf");
  CHECK_THROWS_AS(io::profile_from_json(json{{"levels", {{{"kappa", "big"}, {"phi", 1}}}}}), DataError);
  CHECK_THROWS_AS(io::profile_from_json(json{{"levels", {{{"phi", 1}}}}}), DataError);
}

TEST_CASE("equilibrium and solution round trips") {
  EquilibriumResult eq;
  eq.m_eq = 2;
  eq.m_all = 3;
  eq.eq_latency = 1.5;
  eq.cost = 12.25;
  eq.routing = Routing(3);
  eq.routing.human = {1, 2, 0};
  eq.routing.autonomous = {0.5, 0, 0};
  eq.routing.congested = {true, false, false};
  const auto e2 = io::equilibrium_from_json(io::to_json(eq));
  CHECK(e2.m_eq == 2);
  CHECK(e2.m_all == 3);
  CHECK(e2.cost == 12.25);
  CHECK(e2.routing == eq.routing);

  PricingSolution s;
  s.k = 1;
  s.routing = eq.routing;
  s.prices = {0.5, 1.5, 2.5};
  s.objective = -0.25;
  s.q = {0.1, 0.2, 0.3, 0.4};
  s.profit = 3.0;
  s.f_b = std::vector<double>{1, 0, 0};
  s.diagnostics.restarts = 12;
  s.diagnostics.max_residual = 1e-9;
  CHECK(io::solution_from_json(io::to_json(s)) == s);
  s.f_b.reset();
  CHECK_FALSE(io::to_json(s).contains("f_b"));
  CHECK(io::solution_from_json(io::to_json(s)) == s);

  json uneven = io::to_json(eq.routing);
  uneven["f_a"] = {1.0};
  CHECK_THROWS_AS(io::routing_from_json(uneven), DataError);
}

TEST_CASE("choices and populations as JSONL") {
  const std::vector<ChoiceDatum> data{{RouteOffer{{1, 2}, {1, 0}, 2}, 1}, {RouteOffer{{3}, {0}, 1}, 0}};
  std::istringstream in(io::choices_to_jsonl(data));
  CHECK(io::choices_from_jsonl(in) == data);

  const PopulationSamples pop = fixture::two_atoms();
  std::istringstream pin(io::population_to_jsonl(pop));
  CHECK(io::population_from_jsonl(pin).samples == pop.samples);

  // Blank lines are skipped; the line number of a bad record is reported.
  std::istringstream gap("{\"omega1\":1,\"omega2\":1,\"zeta\":1}\n\n{\"omega1\":2,\"omega2\":1,\"zeta\":0}\n");
  CHECK(io::population_from_jsonl(gap).size() == 2);
  std::istringstream broken("{\"omega1\":1,\"omega2\":1,\"zeta\":1}\n{\"omega1\":\n");
  try {
    io::population_from_jsonl(broken);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream negative("{\"omega1\":-1,\"omega2\":1,\"zeta\":1}\n");
  CHECK_THROWS_AS(io::population_from_jsonl(negative), DataError);
  std::istringstream empty("");
  CHECK_THROWS_AS(io::population_from_jsonl(empty), DataError);
  std::istringstream fractional(R"({"offer":{"l":[1],"p":[0],"l_w":1},"chosen":0.5})");
  CHECK_THROWS_AS(io::choices_from_jsonl(fractional), DataError);
}

TEST_CASE("problem files") {
  const auto dir = fixture::temp_dir("io-problem");
  PricingProblem p = fixture::desk_problem();
  p.uncontrolled_lambda_b = 4.0;
  io::write_file(dir / "pop.jsonl", io::population_to_jsonl(p.population));
  io::write_file(dir / "problem.json", io::problem_to_json(p, "pop.jsonl").dump(2));
  const PricingProblem back = io::problem_from_json(io::read_json_file(dir / "problem.json"), dir);
  CHECK(back.lambda_h == p.lambda_h);
  CHECK(back.alt_latency == p.alt_latency);
  CHECK(back.uncontrolled_lambda_b == p.uncontrolled_lambda_b);
  CHECK(back.population.samples == p.population.samples);
  CHECK(back.network.size() == 2);
  CHECK_FALSE(std::filesystem::exists(dir / "problem.json.tmp"));

  json missing = io::problem_to_json(p, "nowhere.jsonl");
  CHECK_THROWS_AS(io::problem_from_json(missing, dir), DataError);
  missing.erase("theta");
  CHECK_THROWS_AS(io::problem_from_json(missing, dir), DataError);
  io::write_file(dir / "bad.json", "{ nope");
  CHECK_THROWS_AS(io::read_json_file(dir / "bad.json"), DataError);
  CHECK_THROWS_AS(io::read_file(dir / "absent"), DataError);
}
