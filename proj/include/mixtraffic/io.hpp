#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtraffic/choice.hpp"
#include "mixtraffic/equilibria.hpp"
#include "mixtraffic/learning.hpp"
#include "mixtraffic/network.hpp"
#include "mixtraffic/pricing.hpp"

namespace mixtraffic::io {

using nlohmann::json;

/// {"roads": [{"d", "v", "b", "h_h", "h_a", "n_bar"}, ...]}
json to_json(const RoadNetwork& network);
/// Throws DataError on missing fields and ValidationError on invalid roads.
RoadNetwork network_from_json(const json& doc);

/// {"levels": [{"kappa", "phi"}, ...]}; an infinite kappa is written "inf".
json to_json(const FlexibilityProfile& profile);
FlexibilityProfile profile_from_json(const json& doc);

json to_json(const Routing& routing);
Routing routing_from_json(const json& doc);

json to_json(const EquilibriumResult& result);
EquilibriumResult equilibrium_from_json(const json& doc);

json to_json(const UserParams& params);
UserParams params_from_json(const json& doc);

json to_json(const RouteOffer& offer);
RouteOffer offer_from_json(const json& doc);

json to_json(const ChoiceDatum& datum);
ChoiceDatum datum_from_json(const json& doc);

json to_json(const PricingSolution& solution);
PricingSolution solution_from_json(const json& doc);

/// The problem file names its population by path; relative paths resolve
/// against `base_dir`.
PricingProblem problem_from_json(const json& doc, const std::filesystem::path& base_dir);
json problem_to_json(const PricingProblem& problem, const std::string& population_path);

std::string population_to_jsonl(const PopulationSamples& population);
PopulationSamples population_from_jsonl(std::istream& in);
std::vector<ChoiceDatum> choices_from_jsonl(std::istream& in);
std::string choices_to_jsonl(const std::vector<ChoiceDatum>& data);

std::string read_file(const std::filesystem::path& path);
json read_json_file(const std::filesystem::path& path);
PopulationSamples read_population_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial content.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace mixtraffic::io
