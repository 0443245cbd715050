#include "nnse/analyses.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <set>
#include <string>

#include "nnse/error.hpp"

namespace nnse {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

AttackResult attack(const Model& model, const AttackSpec& spec) {
  const auto start = Clock::now();
  const std::vector<SymVar> vars = make_variables(model, spec.marking);
  const std::size_t original_label = forward(model, spec.original).prediction.label;
  const std::size_t classes = model.output_shape_of(model.logits_depth() - 1).element_count();

  std::vector<std::size_t> candidates;
  if (const auto* t = std::get_if<Targeted>(&spec.goal)) {
    if (t->target >= classes) throw Error(ErrorCode::InvalidArgument, "target class out of range");
    if (t->target == original_label) {
      throw Error(ErrorCode::InvalidArgument, "target class equals the original label");
    }
    candidates.push_back(t->target);
  } else {
    for (std::size_t c = 0; c < classes; ++c) {
      if (c != original_label) candidates.push_back(c);
    }
  }

  AttackResult result;
  result.original_label = original_label;
  result.outcome = NoneWithinBudget{};
  AttackStats& stats = result.stats;
  std::optional<Found> found;
  std::size_t path_index = 0;

  auto visitor = [&](const PathResult& path, PathQuery& query) {
    const std::size_t index = path_index++;
    for (std::size_t c : candidates) {
      auto constraints = resolve(decision_constraint(path.symbolic_logits, c));
      if (!constraints) continue;
      ++stats.decision_checks;
      const auto solve_start = Clock::now();
      SolverResult r = query.check_with(*constraints);
      stats.solver_seconds += seconds_since(solve_start);
      if (std::holds_alternative<Unknown>(r)) {
        ++stats.decision_unknown;
        if (query.budget_exhausted()) return Visit::Stop;
        continue;
      }
      const auto* sat = std::get_if<Sat>(&r);
      if (!sat) continue;

      std::vector<double> values(vars.size());
      for (std::size_t i = 0; i < vars.size(); ++i) {
        values[i] = std::clamp(to_double(sat->assignment[i]), vars[i].lower, vars[i].upper);
      }
      Tensor adversarial = spec.original;
      std::size_t label = 0;
      if (spec.marking.mode == MarkingMode::SymbolicInputs) {
        adversarial = embed_inputs(spec.original, spec.marking, values);
        label = forward(model, adversarial).prediction.label;
      } else {
        label = forward(embed_params(model, spec.marking, values), spec.original).prediction.label;
      }
      const bool goal_met = std::holds_alternative<Targeted>(spec.goal) ? label == c : label != original_label;
      if (!goal_met) {
        ++stats.validation_failures;
        continue;
      }
      found = Found{std::move(adversarial), std::move(values), sat->assignment, label, original_label, index};
      return Visit::Stop;
    }
    return Visit::Continue;
  };

  const ExplorationResult explored =
      explore_paths(model, spec.marking, spec.original, spec.budget, visitor, false, spec.solver);
  stats.exploration = explored.stats;
  stats.paths_explored = path_index;
  if (found) {
    result.outcome = std::move(*found);
  } else if (explored.complete() && stats.decision_unknown == 0 && stats.validation_failures == 0) {
    result.outcome = ProvenRobust{};
  }
  stats.seconds = seconds_since(start);
  return result;
}

RobustnessVerdict check_robustness(const Model& model, const Tensor& input, const SymbolicMarking& marking,
                                   const ExplorationBudget& budget, SolverOptions solver) {
  AttackSpec spec{marking, input, AnyMisclassification{}, budget, solver};
  AttackResult r = attack(model, spec);
  if (r.proven_robust()) return Robust{};
  if (r.found()) return CounterexampleFound{std::move(r)};
  return Inconclusive{std::move(r)};
}

CoverageReport coverage(const Model& model, std::span<const Tensor> dataset) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "coverage needs at least one input");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].shape() != model.input_shape()) {
      throw Error(ErrorCode::ShapeMismatch, "input " + std::to_string(i) + " has shape " +
                                                dataset[i].shape().to_string() + ", model expects " +
                                                model.input_shape().to_string());
    }
  }

  std::vector<ActivationPattern> patterns(dataset.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    try {
      patterns[i] = forward(model, dataset[i], Backend::Serial).pattern;
    } catch (...) {
#pragma omp critical(nnse_coverage_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  CoverageReport report;
  report.inputs = dataset.size();
  std::set<std::vector<std::uint8_t>> distinct;
  std::vector<std::vector<std::uint8_t>> seen;
  for (const ActivationPattern& p : patterns) {
    std::vector<std::uint8_t> signs;
    if (seen.empty()) {
      for (const auto& r : p.relu) seen.emplace_back(r.active.size(), 0);
    }
    for (std::size_t l = 0; l < p.relu.size(); ++l) {
      const auto& active = p.relu[l].active;
      for (std::size_t n = 0; n < active.size(); ++n) seen[l][n] |= active[n];
      signs.insert(signs.end(), active.begin(), active.end());
    }
    distinct.insert(std::move(signs));
  }
  for (std::size_t l = 0; l < seen.size(); ++l) {
    LayerCoverage lc;
    lc.layer = patterns.front().relu[l].layer;
    lc.neurons = seen[l].size();
    lc.covered = static_cast<std::size_t>(std::count(seen[l].begin(), seen[l].end(), 1));
    lc.fraction = lc.neurons ? static_cast<double>(lc.covered) / static_cast<double>(lc.neurons) : 0.0;
    report.neurons += lc.neurons;
    report.covered += lc.covered;
    report.layers.push_back(lc);
  }
  report.neuron_coverage =
      report.neurons ? static_cast<double>(report.covered) / static_cast<double>(report.neurons) : 0.0;
  report.distinct_patterns = distinct.size();
  return report;
}

}  // namespace nnse
