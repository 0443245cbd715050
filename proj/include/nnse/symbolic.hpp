#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnse/affine.hpp"
#include "nnse/forward.hpp"
#include "nnse/model.hpp"
#include "nnse/solver.hpp"

namespace nnse {

enum class MarkingMode { SymbolicInputs, SymbolicParams };

/// A parameter of one Conv2D/Dense layer. `offset` indexes the layer's
/// weights followed by its biases (offset >= weights.size() selects bias
/// offset - weights.size()).
struct ParamPosition {
  std::size_t layer = 0;
  std::size_t offset = 0;
  friend bool operator==(const ParamPosition&, const ParamPosition&) = default;
};

struct VarBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Which values become symbolic. Inputs and parameters are never mixed, and
/// all symbolic parameters live in one layer, so every neuron value stays
/// affine in the variables.
struct SymbolicMarking {
  MarkingMode mode = MarkingMode::SymbolicInputs;
  std::vector<std::vector<std::size_t>> input_positions;  // multi-indices into the input
  std::vector<ParamPosition> param_positions;
  std::vector<VarBounds> bounds;  // one per position

  std::size_t size() const noexcept {
    return mode == MarkingMode::SymbolicInputs ? input_positions.size() : param_positions.size();
  }

  static SymbolicMarking inputs(std::vector<std::vector<std::size_t>> positions, double lower, double upper);
  static SymbolicMarking params(std::vector<ParamPosition> positions, double lower, double upper);
};

/// Validates the marking against the model and returns one variable per
/// position, named `sym_<i>_<j>...` for inputs and `p<layer>_<offset>` for
/// parameters. Throws InvalidMarking or NonlinearTerm.
std::vector<SymVar> make_variables(const Model& model, const SymbolicMarking& marking);

/// Concrete values the marked positions take in (model, input).
std::vector<double> marked_values(const Model& model, const Tensor& input, const SymbolicMarking& marking);

/// Copy of `input` with the marked input positions overwritten.
Tensor embed_inputs(const Tensor& input, const SymbolicMarking& marking, std::span<const double> values);
/// Copy of `model` with the marked parameters overwritten.
Model embed_params(const Model& model, const SymbolicMarking& marking, std::span<const double> values);

/// A branch point whose condition involved symbolic variables. `choice` is
/// 1/0 for an active/inactive ReLU or the selected in-window index for a pool.
struct BranchDecision {
  BranchKind kind = BranchKind::Relu;
  std::size_t layer = 0;
  std::size_t index = 0;
  std::int64_t choice = 0;
  friend bool operator==(const BranchDecision&, const BranchDecision&) = default;
};

struct PathResult {
  PathConstraint path_constraint;
  std::vector<AffineExpr> symbolic_logits;
  ActivationPattern pattern;
  std::vector<BranchDecision> decisions;
  std::optional<std::vector<Rational>> witness;
  std::optional<std::size_t> predicted_label;  // label of the witness under forward()
};

struct ExplorationBudget {
  std::size_t max_paths = 1000;
  std::size_t max_solver_calls = 100000;
  double wall_timeout = 60.0;  // seconds
};

struct ExplorationStats {
  std::size_t paths = 0;
  std::size_t solver_calls = 0;
  std::size_t infeasible_branches = 0;
  std::size_t unknown_branches = 0;
  double seconds = 0.0;
  SolverStats solver;
};

struct ExplorationResult {
  std::vector<PathResult> paths;
  bool truncated = false;  // a budget limit stopped the search
  ExplorationStats stats;

  /// Every branch was decided and the search ran to the end.
  bool complete() const noexcept { return !truncated && stats.unknown_branches == 0; }
};

/// Follows the concrete path of `input` while propagating affine
/// expressions. Branch outcomes come from the concrete run: a pre-activation
/// of exactly 0 is inactive, pool ties go to the lowest in-window index.
PathResult symbolic_forward_concolic(const Model& model, const Tensor& input, const SymbolicMarking& marking);

/// Feasibility of the current path extended with extra constraints; handed to
/// path visitors.
class PathQuery {
 public:
  virtual ~PathQuery() = default;
  virtual SolverResult check_with(std::span<const LinearConstraint> extra) = 0;
  virtual bool budget_exhausted() const = 0;
};

enum class Visit { Continue, Stop };
using PathVisitor = std::function<Visit(const PathResult&, PathQuery&)>;

/// Depth-first enumeration of feasible paths. Branches are taken in layer
/// order then flat neuron order; at each branch the side containing the
/// current witness (initially the seed) is explored first. Paths are passed
/// to `visitor` and, when `keep_paths` is set, collected in the result.
ExplorationResult explore_paths(const Model& model, const SymbolicMarking& marking, const Tensor& seed,
                                const ExplorationBudget& budget, const PathVisitor& visitor, bool keep_paths,
                                SolverOptions solver_options = {});

ExplorationResult explore_paths(const Model& model, const SymbolicMarking& marking, const Tensor& seed,
                                const ExplorationBudget& budget, SolverOptions solver_options = {});

/// "argmax of logits is `target`" with lowest-index tie-break:
/// logit_target - logit_j > 0 for j < target, >= 0 for j > target.
std::vector<ConstraintOutcome> decision_constraint(std::span<const AffineExpr> logits, std::size_t target);

/// Drops tautologies; returns nullopt if any outcome is a contradiction.
std::optional<std::vector<LinearConstraint>> resolve(std::span<const ConstraintOutcome> outcomes);

}  // namespace nnse
