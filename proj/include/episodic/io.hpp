#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "episodic/exact_solvers.hpp"
#include "episodic/game_model.hpp"
#include "episodic/graph_analysis.hpp"

namespace episodic {

// Tables JSON:
//   {"states": n, "M": M, "method": "...", "tau": t|null, "max_residual": r,
//    "agents": [{"q": [s][m][a], "v": [s][m], "policy": [s][m][a]}, x2]}
nlohmann::json tables_to_json(const SolutionTables& tables);
SolutionTables tables_from_json(const nlohmann::json& doc);

// Reads the "policy" arrays of a tables document (other fields optional).
EpisodicProfile profile_from_json(const nlohmann::json& doc);

nlohmann::json bound_report_to_json(const BoundReport& report);
BoundReport bound_report_from_json(const nlohmann::json& doc);

nlohmann::json classification_to_json(const StochasticGame& game, const StageClassification& c);

nlohmann::json graph_report_to_json(const StochasticGame& game, int episode_length);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace episodic
