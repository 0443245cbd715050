#pragma once

#include <json.hpp>

#include "nnse/analyses.hpp"

namespace nnse {

/// JSON views of analysis results. Timings live under a top-level
/// "metadata" key so the rest of a report is byte-stable across runs.

nlohmann::json to_json(const Prediction& prediction);
nlohmann::json to_json(const PathResult& path);
nlohmann::json to_json(const ExplorationResult& result);
nlohmann::json to_json(const AttackResult& result, const SymbolicMarking& marking, std::span<const SymVar> vars);
nlohmann::json to_json(const CoverageReport& report);

std::string_view to_string(BranchKind kind);

}  // namespace nnse
