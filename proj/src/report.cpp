#include "nnse/report.hpp"

#include "nnse/tensor_io.hpp"

namespace nnse {

using nlohmann::json;

std::string_view to_string(BranchKind kind) {
  switch (kind) {
    case BranchKind::Relu: return "relu";
    case BranchKind::Pool: return "maxpool";
    case BranchKind::Decision: return "decision";
  }
  return "?";
}

namespace {

json witness_json(std::span<const SymVar> vars, std::span<const Rational> values) {
  json out = json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({{"var", vars[i].name}, {"exact", values[i].get_str()}, {"value", to_double(values[i])}});
  }
  return out;
}

json stats_json(const ExplorationStats& s) {
  return {{"paths", s.paths},
          {"solver_calls", s.solver_calls},
          {"infeasible_branches", s.infeasible_branches},
          {"unknown_branches", s.unknown_branches}};
}

json timing_json(const ExplorationStats& s) {
  return {{"exploration_seconds", s.seconds},
          {"solver_seconds", s.solver.seconds},
          {"solver_checks", s.solver.checks},
          {"simplex_runs", s.solver.simplex_runs},
          {"pivots", s.solver.pivots}};
}

json marking_json(const SymbolicMarking& marking, std::span<const SymVar> vars) {
  json positions = json::array();
  for (std::size_t i = 0; i < marking.size(); ++i) {
    json p{{"var", vars[i].name}, {"lower", vars[i].lower}, {"upper", vars[i].upper}};
    if (marking.mode == MarkingMode::SymbolicInputs) {
      p["index"] = marking.input_positions[i];
    } else {
      p["layer"] = marking.param_positions[i].layer;
      p["offset"] = marking.param_positions[i].offset;
    }
    positions.push_back(std::move(p));
  }
  return {{"mode", marking.mode == MarkingMode::SymbolicInputs ? "inputs" : "params"}, {"positions", positions}};
}

}  // namespace

json to_json(const Prediction& prediction) {
  json out{{"label", prediction.label}, {"logits", prediction.logits.values()}};
  if (prediction.probabilities) out["probabilities"] = prediction.probabilities->values();
  return out;
}

json to_json(const PathResult& path) {
  const auto& vars = path.path_constraint.vars;
  json constraints = json::array();
  for (const LinearConstraint& c : path.path_constraint.constraints) {
    const Provenance& p = c.provenance();
    constraints.push_back({{"text", render(c, vars)},
                           {"kind", to_string(p.kind)},
                           {"layer", p.layer},
                           {"index", p.index},
                           {"branch", p.branch}});
  }
  json logits = json::array();
  for (const AffineExpr& e : path.symbolic_logits) logits.push_back(render(e, vars));
  json decisions = json::array();
  for (const BranchDecision& d : path.decisions) {
    decisions.push_back({{"kind", to_string(d.kind)}, {"layer", d.layer}, {"index", d.index}, {"choice", d.choice}});
  }
  json out{{"constraints", constraints}, {"symbolic_logits", logits}, {"decisions", decisions}};
  out["witness"] = path.witness ? witness_json(vars, *path.witness) : json(nullptr);
  out["predicted_label"] = path.predicted_label ? json(*path.predicted_label) : json(nullptr);
  return out;
}

json to_json(const ExplorationResult& result) {
  json paths = json::array();
  for (const PathResult& p : result.paths) paths.push_back(to_json(p));
  return {{"paths", paths},
          {"truncated", result.truncated},
          {"complete", result.complete()},
          {"stats", stats_json(result.stats)},
          {"metadata", timing_json(result.stats)}};
}

json to_json(const AttackResult& result, const SymbolicMarking& marking, std::span<const SymVar> vars) {
  json out{{"original_label", result.original_label}, {"marking", marking_json(marking, vars)}};
  if (const auto* f = std::get_if<Found>(&result.outcome)) {
    out["verdict"] = "found";
    out["new_label"] = f->new_label;
    out["path_index"] = f->path_index;
    out["witness"] = witness_json(vars, f->witness);
    out["marked_values"] = f->marked_values;
  } else if (result.proven_robust()) {
    out["verdict"] = "robust";
  } else {
    out["verdict"] = "none_within_budget";
  }
  const AttackStats& s = result.stats;
  out["stats"] = stats_json(s.exploration);
  out["stats"]["paths_explored"] = s.paths_explored;
  out["stats"]["decision_checks"] = s.decision_checks;
  out["stats"]["decision_unknown"] = s.decision_unknown;
  out["stats"]["validation_failures"] = s.validation_failures;
  out["metadata"] = timing_json(s.exploration);
  out["metadata"]["attack_seconds"] = s.seconds;
  out["metadata"]["decision_solver_seconds"] = s.solver_seconds;
  return out;
}

json to_json(const CoverageReport& report) {
  json layers = json::array();
  for (const LayerCoverage& l : report.layers) {
    layers.push_back({{"layer", l.layer}, {"neurons", l.neurons}, {"covered", l.covered}, {"fraction", l.fraction}});
  }
  return {{"neuron_coverage", report.neuron_coverage},
          {"neurons", report.neurons},
          {"covered", report.covered},
          {"layers", layers},
          {"distinct_patterns", report.distinct_patterns},
          {"inputs", report.inputs}};
}

}  // namespace nnse
