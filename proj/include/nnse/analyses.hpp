#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "nnse/symbolic.hpp"

namespace nnse {

struct AnyMisclassification {};
struct Targeted {
  std::size_t target = 0;
};
using AttackGoal = std::variant<AnyMisclassification, Targeted>;

struct AttackSpec {
  SymbolicMarking marking;
  Tensor original;
  AttackGoal goal = AnyMisclassification{};
  ExplorationBudget budget;
  SolverOptions solver;
};

/// A validated counterexample. For symbolic parameters `adversarial` equals
/// the original input and `marked_values` holds the new parameter values.
struct Found {
  Tensor adversarial;
  std::vector<double> marked_values;
  std::vector<Rational> witness;
  std::size_t new_label = 0;
  std::size_t original_label = 0;
  std::size_t path_index = 0;  // 0-based, exploration order
};
struct NoneWithinBudget {};
struct ProvenRobust {};

struct AttackStats {
  std::size_t paths_explored = 0;
  std::size_t decision_checks = 0;
  std::size_t decision_unknown = 0;
  std::size_t validation_failures = 0;  // solver witnesses that did not flip the label concretely
  double solver_seconds = 0.0;
  double seconds = 0.0;
  ExplorationStats exploration;
};

struct AttackResult {
  std::variant<Found, NoneWithinBudget, ProvenRobust> outcome;
  std::size_t original_label = 0;
  AttackStats stats;

  bool found() const noexcept { return std::holds_alternative<Found>(outcome); }
  bool proven_robust() const noexcept { return std::holds_alternative<ProvenRobust>(outcome); }
};

/// Searches explored paths, in order, for an assignment that changes the
/// label. Per path the candidate classes are tried in ascending order; every
/// solver witness is re-executed concretely and only a real flip is
/// returned. ProvenRobust requires that exploration finished with every
/// branch and decision query decided. Targeting the original label throws
/// InvalidArgument.
AttackResult attack(const Model& model, const AttackSpec& spec);

struct Robust {};
struct CounterexampleFound {
  AttackResult result;
};
struct Inconclusive {
  AttackResult result;
};
using RobustnessVerdict = std::variant<Robust, CounterexampleFound, Inconclusive>;

RobustnessVerdict check_robustness(const Model& model, const Tensor& input, const SymbolicMarking& marking,
                                   const ExplorationBudget& budget, SolverOptions solver = {});

struct LayerCoverage {
  std::size_t layer = 0;
  std::size_t neurons = 0;
  std::size_t covered = 0;
  double fraction = 0.0;
};

struct CoverageReport {
  double neuron_coverage = 0.0;  // covered / total over all ReLU layers
  std::size_t neurons = 0;
  std::size_t covered = 0;
  std::vector<LayerCoverage> layers;
  std::size_t distinct_patterns = 0;  // distinct ReLU sign patterns
  std::size_t inputs = 0;
};

/// A ReLU neuron is covered when its pre-activation is > 0 for at least one
/// input. Throws EmptyDataset or ShapeMismatch.
CoverageReport coverage(const Model& model, std::span<const Tensor> dataset);

}  // namespace nnse
