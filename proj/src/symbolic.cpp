#include "nnse/symbolic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

#include "nnse/error.hpp"
#include "symbolic_layers.hpp"

namespace nnse {

using detail::ParamVars;
using detail::SymTensor;

SymbolicMarking SymbolicMarking::inputs(std::vector<std::vector<std::size_t>> positions, double lower, double upper) {
  SymbolicMarking m;
  m.mode = MarkingMode::SymbolicInputs;
  m.bounds.assign(positions.size(), VarBounds{lower, upper});
  m.input_positions = std::move(positions);
  return m;
}

SymbolicMarking SymbolicMarking::params(std::vector<ParamPosition> positions, double lower, double upper) {
  SymbolicMarking m;
  m.mode = MarkingMode::SymbolicParams;
  m.bounds.assign(positions.size(), VarBounds{lower, upper});
  m.param_positions = std::move(positions);
  return m;
}

namespace {

[[noreturn]] void bad_marking(const std::string& msg) { throw Error(ErrorCode::InvalidMarking, msg); }

std::size_t param_slots(const Model& model, std::size_t layer) {
  return model.params(layer).weights.size() + model.params(layer).biases.size();
}

double& param_slot(Model& model, const ParamPosition& p);

}  // namespace

std::vector<SymVar> make_variables(const Model& model, const SymbolicMarking& marking) {
  const bool inputs = marking.mode == MarkingMode::SymbolicInputs;
  if (inputs && !marking.param_positions.empty()) {
    throw Error(ErrorCode::NonlinearTerm, "symbolic inputs and symbolic parameters cannot be mixed");
  }
  if (!inputs && !marking.input_positions.empty()) {
    throw Error(ErrorCode::NonlinearTerm, "symbolic inputs and symbolic parameters cannot be mixed");
  }
  if (marking.bounds.size() != marking.size()) bad_marking("need one bounds entry per marked position");

  std::vector<SymVar> vars;
  vars.reserve(marking.size());
  if (inputs) {
    std::set<std::size_t> seen;
    for (const auto& pos : marking.input_positions) {
      std::size_t flat = 0;
      try {
        flat = model.input_shape().flat_index(pos);
      } catch (const Error&) {
        bad_marking("input position out of range for shape " + model.input_shape().to_string());
      }
      if (!seen.insert(flat).second) bad_marking("input position marked twice");
      std::string name = "sym";
      for (std::size_t i : pos) name += "_" + std::to_string(i);
      vars.push_back(SymVar{static_cast<VarIndex>(vars.size()), std::move(name), 0.0, 0.0});
    }
  } else {
    std::set<std::size_t> seen;
    for (const ParamPosition& p : marking.param_positions) {
      if (p.layer >= model.layer_count()) bad_marking("parameter layer out of range");
      if (!model.layer(p.layer).has_params()) bad_marking("layer " + std::to_string(p.layer) + " has no parameters");
      if (p.layer != marking.param_positions.front().layer) {
        throw Error(ErrorCode::NonlinearTerm, "symbolic parameters must all belong to one layer");
      }
      if (p.offset >= param_slots(model, p.layer)) bad_marking("parameter offset out of range");
      if (!seen.insert(p.offset).second) bad_marking("parameter marked twice");
      vars.push_back(SymVar{static_cast<VarIndex>(vars.size()),
                            "p" + std::to_string(p.layer) + "_" + std::to_string(p.offset), 0.0, 0.0});
    }
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const VarBounds& b = marking.bounds[i];
    if (!std::isfinite(b.lower) || !std::isfinite(b.upper)) bad_marking("bounds must be finite");
    if (b.lower > b.upper) bad_marking("lower bound exceeds upper bound for " + vars[i].name);
    vars[i].lower = b.lower;
    vars[i].upper = b.upper;
  }
  return vars;
}

namespace {

double& param_slot(Model& model, const ParamPosition& p) {
  auto& params = const_cast<LayerParams&>(model.params(p.layer));
  const std::size_t nw = params.weights.size();
  return p.offset < nw ? params.weights[p.offset] : params.biases[p.offset - nw];
}

double param_value(const Model& model, const ParamPosition& p) {
  const auto& params = model.params(p.layer);
  const std::size_t nw = params.weights.size();
  return p.offset < nw ? params.weights[p.offset] : params.biases[p.offset - nw];
}

}  // namespace

std::vector<double> marked_values(const Model& model, const Tensor& input, const SymbolicMarking& marking) {
  std::vector<double> values;
  if (marking.mode == MarkingMode::SymbolicInputs) {
    for (const auto& pos : marking.input_positions) values.push_back(input[input.shape().flat_index(pos)]);
  } else {
    for (const auto& p : marking.param_positions) values.push_back(param_value(model, p));
  }
  return values;
}

Tensor embed_inputs(const Tensor& input, const SymbolicMarking& marking, std::span<const double> values) {
  Tensor out = input;
  for (std::size_t i = 0; i < marking.input_positions.size(); ++i) {
    out[out.shape().flat_index(marking.input_positions[i])] = values[i];
  }
  return out;
}

Model embed_params(const Model& model, const SymbolicMarking& marking, std::span<const double> values) {
  Model out = model;
  for (std::size_t i = 0; i < marking.param_positions.size(); ++i) param_slot(out, marking.param_positions[i]) = values[i];
  return out;
}

std::vector<ConstraintOutcome> decision_constraint(std::span<const AffineExpr> logits, std::size_t target) {
  if (logits.size() < 2) throw Error(ErrorCode::InvalidArgument, "decision constraints need at least two logits");
  if (target >= logits.size()) throw Error(ErrorCode::InvalidArgument, "target class out of range");
  std::vector<ConstraintOutcome> out;
  out.reserve(logits.size() - 1);
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j == target) continue;
    const Provenance prov{BranchKind::Decision, 0, j, static_cast<std::int64_t>(target)};
    out.push_back(make_constraint(logits[target] - logits[j], j < target ? Relation::GT0 : Relation::GE0, prov));
  }
  return out;
}

std::optional<std::vector<LinearConstraint>> resolve(std::span<const ConstraintOutcome> outcomes) {
  std::vector<LinearConstraint> out;
  for (const ConstraintOutcome& o : outcomes) {
    if (std::holds_alternative<Contradiction>(o)) return std::nullopt;
    if (const auto* c = std::get_if<LinearConstraint>(&o)) out.push_back(*c);
  }
  return out;
}

namespace {

/// Input tensor and parameter-variable map for a marking.
struct SymbolicSetup {
  std::vector<SymVar> vars;
  SymTensor input;
  ParamVars params;
};

SymbolicSetup setup(const Model& model, const Tensor& input, const SymbolicMarking& marking) {
  if (input.shape() != model.input_shape()) {
    throw Error(ErrorCode::ShapeMismatch,
                "input shape " + input.shape().to_string() + ", model expects " + model.input_shape().to_string());
  }
  SymbolicSetup s;
  s.vars = make_variables(model, marking);
  s.input.reserve(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) s.input.push_back(AffineExpr::constant(input[i]));
  if (marking.mode == MarkingMode::SymbolicInputs) {
    for (std::size_t k = 0; k < marking.input_positions.size(); ++k) {
      s.input[input.shape().flat_index(marking.input_positions[k])] = AffineExpr::variable(static_cast<VarIndex>(k));
    }
  } else if (!marking.param_positions.empty()) {
    const std::size_t layer = marking.param_positions.front().layer;
    s.params.layer = layer;
    s.params.var_of.assign(param_slots(model, layer), -1);
    for (std::size_t k = 0; k < marking.param_positions.size(); ++k) {
      s.params.var_of[marking.param_positions[k].offset] = static_cast<std::int64_t>(k);
    }
  }
  return s;
}

/// Selecting window element k: strictly above lower-index elements (which win
/// ties), at least equal to higher-index ones.
Relation pool_relation(std::size_t j, std::size_t k) { return j < k ? Relation::GT0 : Relation::GE0; }

SymTensor apply_linear(const Model& model, std::size_t layer, SymTensor in, const ParamVars& params,
                       std::size_t var_count) {
  switch (model.layer(layer).kind) {
    case LayerKind::Dense: return detail::sym_dense(model, layer, in, &params, var_count);
    case LayerKind::Conv2D: return detail::sym_conv2d(model, layer, in, &params, var_count);
    case LayerKind::Flatten: return in;
    default: throw std::logic_error("apply_linear on a branching layer");
  }
}

std::vector<Rational> to_rationals(std::span<const double> values) {
  std::vector<Rational> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(to_rational(v));
  return out;
}

std::vector<double> to_doubles(const std::vector<Rational>& values, const std::vector<SymVar>& vars) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::clamp(to_double(values[i]), vars[i].lower, vars[i].upper);
  }
  return out;
}

}  // namespace

PathResult symbolic_forward_concolic(const Model& model, const Tensor& input, const SymbolicMarking& marking) {
  SymbolicSetup s = setup(model, input, marking);
  const ForwardResult concrete = forward(model, input);
  const std::size_t nvars = s.vars.size();

  PathResult result;
  result.path_constraint.vars = s.vars;
  auto& constraints = result.path_constraint.constraints;
  auto keep = [&](ConstraintOutcome outcome) {
    if (auto* c = std::get_if<LinearConstraint>(&outcome)) {
      constraints.push_back(std::move(*c));
    } else if (std::holds_alternative<Contradiction>(outcome)) {
      throw std::logic_error("concolic branch contradicts its own concrete execution");
    }
  };

  SymTensor current = std::move(s.input);
  std::size_t relu_i = 0, pool_i = 0;
  for (std::size_t layer = 0; layer < model.logits_depth(); ++layer) {
    switch (model.layer(layer).kind) {
      case LayerKind::ReLU: {
        const auto& active = concrete.pattern.relu.at(relu_i++).active;
        for (std::size_t i = 0; i < current.size(); ++i) {
          const bool on = active[i] != 0;
          if (!current[i].is_constant()) {
            keep(constraint_from_branch(current[i], on, Provenance{BranchKind::Relu, layer, i, 0}));
            result.decisions.push_back(BranchDecision{BranchKind::Relu, layer, i, on ? 1 : 0});
          }
          if (!on) current[i] = AffineExpr();
        }
        break;
      }
      case LayerKind::MaxPool2D: {
        const auto& choice = concrete.pattern.pool.at(pool_i++).choice;
        const auto windows = detail::pool_windows(model, layer);
        SymTensor next(windows.size());
        for (std::size_t o = 0; o < windows.size(); ++o) {
          const auto& win = windows[o];
          const std::size_t k = choice[o];
          const bool symbolic = std::any_of(win.begin(), win.end(), [&](std::size_t i) { return !current[i].is_constant(); });
          if (symbolic) {
            const auto k64 = static_cast<std::int64_t>(k);
            for (std::size_t j = 0; j < win.size(); ++j) {
              if (j == k) continue;
              keep(make_constraint(current[win[k]] - current[win[j]], pool_relation(j, k),
                                   Provenance{BranchKind::Pool, layer, o, k64}));
            }
            result.decisions.push_back(BranchDecision{BranchKind::Pool, layer, o, k64});
          }
          next[o] = current[win[k]];
        }
        current = std::move(next);
        break;
      }
      default:
        current = apply_linear(model, layer, std::move(current), s.params, nvars);
        break;
    }
  }

  result.symbolic_logits = std::move(current);
  result.pattern = concrete.pattern;
  result.witness = to_rationals(marked_values(model, input, marking));
  result.predicted_label = concrete.prediction.label;
  return result;
}

// ---------------------------------------------------------------------------
// exploration

namespace {

using Clock = std::chrono::steady_clock;

class Explorer final : public PathQuery {
 public:
  Explorer(const Model& model, const SymbolicMarking& marking, const Tensor& seed, const ExplorationBudget& budget,
           const PathVisitor& visitor, bool keep_paths, SolverOptions solver_options)
      : model_(model),
        marking_(marking),
        seed_(seed),
        setup_(setup(model, seed, marking)),
        session_(setup_.vars, solver_options),
        budget_(budget),
        visitor_(visitor),
        keep_paths_(keep_paths),
        start_(Clock::now()) {
    if (budget.max_paths == 0 || budget.max_solver_calls == 0 || !(budget.wall_timeout > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "exploration budget fields must be positive");
    }
    for (std::size_t layer = 0; layer < model.logits_depth(); ++layer) {
      const std::size_t n = model.output_shape_of(layer).element_count();
      if (model.layer(layer).kind == LayerKind::ReLU) {
        relu_slot_[layer] = pattern_.relu.size();
        pattern_.relu.push_back(ActivationPattern::Relu{layer, std::vector<std::uint8_t>(n)});
      } else if (model.layer(layer).kind == LayerKind::MaxPool2D) {
        pool_slot_[layer] = pattern_.pool.size();
        pattern_.pool.push_back(ActivationPattern::Pool{layer, std::vector<std::uint32_t>(n)});
        windows_[layer] = detail::pool_windows(model, layer);
      }
    }
  }

  ExplorationResult run() {
    const auto& vars = setup_.vars;
    std::vector<double> seed_values = marked_values(model_, seed_, marking_);
    bool in_box = true;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      in_box = in_box && seed_values[i] >= vars[i].lower && seed_values[i] <= vars[i].upper;
    }
    if (in_box) {
      witnesses_.push_back(to_rationals(seed_values));
    } else {
      ++result_.stats.solver_calls;
      auto r = session_.check();
      if (!is_sat(r)) throw std::logic_error("variable box is empty");
      witnesses_.push_back(std::get<Sat>(r).assignment);
    }
    SymTensor input = setup_.input;
    run_layer(0, input);
    result_.stats.seconds = elapsed();
    result_.stats.solver = session_.stats();
    return std::move(result_);
  }

  SolverResult check_with(std::span<const LinearConstraint> extra) override {
    session_.push(extra);
    SolverResult r = Unknown{UnknownReason::Timeout};
    if (std::all_of(extra.begin(), extra.end(), [&](const LinearConstraint& c) { return witness_fits(c); })) {
      r = Sat{witnesses_.back()};
    } else if (spend_solver_call()) {
      r = session_.check();
    }
    session_.pop();
    return r;
  }

  bool budget_exhausted() const override { return result_.truncated; }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  bool out_of_time() {
    if (elapsed() > budget_.wall_timeout) {
      result_.truncated = true;
      stop_ = true;
    }
    return stop_;
  }

  bool spend_solver_call() {
    if (result_.stats.solver_calls >= budget_.max_solver_calls) {
      result_.truncated = true;
      stop_ = true;
      return false;
    }
    ++result_.stats.solver_calls;
    return true;
  }

  /// The current witness satisfies `c` with a small margin, so it stays on
  /// the same side when re-executed in floating point.
  bool witness_fits(const LinearConstraint& c) const {
    const auto& vars = setup_.vars;
    const Rational value = eval_exact(c.expr(), witnesses_.back());
    double span = 0.0;
    for (const Term& t : c.expr().terms()) span += std::abs(t.coeff) * (vars[t.var].upper - vars[t.var].lower);
    if (span == 0.0) span = 1.0;
    return value >= to_rational(1e-9 * span);
  }

  /// Pushes a branch; returns true when it is feasible (witness updated).
  bool enter(std::vector<LinearConstraint> constraints) {
    if (out_of_time()) return false;
    bool fits = std::all_of(constraints.begin(), constraints.end(), [&](const auto& c) { return witness_fits(c); });
    session_.push(constraints);
    const std::size_t before = path_.size();
    path_.insert(path_.end(), constraints.begin(), constraints.end());
    if (fits) {
      frames_.push_back(Frame{before, false});
      return true;
    }
    if (spend_solver_call()) {
      SolverResult r = session_.check();
      if (auto* sat = std::get_if<Sat>(&r)) {
        witnesses_.push_back(std::move(sat->assignment));
        frames_.push_back(Frame{before, true});
        return true;
      }
      if (is_unsat(r)) {
        ++result_.stats.infeasible_branches;
      } else {
        ++result_.stats.unknown_branches;
      }
    }
    session_.pop();
    path_.erase(path_.begin() + static_cast<std::ptrdiff_t>(before), path_.end());
    return false;
  }

  void leave() {
    const Frame f = frames_.back();
    frames_.pop_back();
    if (f.new_witness) witnesses_.pop_back();
    path_.erase(path_.begin() + static_cast<std::ptrdiff_t>(f.path_size), path_.end());
    session_.pop();
  }

  void run_layer(std::size_t layer, const SymTensor& in) {
    if (stop_) return;
    if (layer == model_.logits_depth()) {
      emit(in);
      return;
    }
    switch (model_.layer(layer).kind) {
      case LayerKind::ReLU: {
        SymTensor out = in;
        relu_step(layer, in, out, 0);
        return;
      }
      case LayerKind::MaxPool2D: {
        SymTensor out(windows_.at(layer).size());
        pool_step(layer, in, out, 0);
        return;
      }
      default:
        run_layer(layer + 1, apply_linear(model_, layer, in, setup_.params, setup_.vars.size()));
        return;
    }
  }

  void relu_step(std::size_t layer, const SymTensor& pre, SymTensor& out, std::size_t i) {
    auto& active = pattern_.relu[relu_slot_.at(layer)].active;
    while (i < pre.size() && pre[i].is_constant()) {
      const bool on = pre[i].constant_term() > 0.0;
      active[i] = on ? 1 : 0;
      out[i] = on ? pre[i] : AffineExpr();
      ++i;
    }
    if (i == pre.size()) {
      run_layer(layer + 1, out);
      return;
    }
    const bool preferred = sgn(eval_exact(pre[i], witnesses_.back())) > 0;
    for (bool side : {preferred, !preferred}) {
      if (stop_) return;
      auto outcome = constraint_from_branch(pre[i], side, Provenance{BranchKind::Relu, layer, i, 0});
      if (!enter({std::get<LinearConstraint>(std::move(outcome))})) continue;
      active[i] = side ? 1 : 0;
      out[i] = side ? pre[i] : AffineExpr();
      decisions_.push_back(BranchDecision{BranchKind::Relu, layer, i, side ? 1 : 0});
      relu_step(layer, pre, out, i + 1);
      decisions_.pop_back();
      leave();
    }
    out[i] = pre[i];
  }

  void pool_step(std::size_t layer, const SymTensor& in, SymTensor& out, std::size_t o) {
    auto& choice = pattern_.pool[pool_slot_.at(layer)].choice;
    const auto& windows = windows_.at(layer);
    auto all_constant = [&](const std::vector<std::size_t>& win) {
      return std::all_of(win.begin(), win.end(), [&](std::size_t i) { return in[i].is_constant(); });
    };
    while (o < windows.size() && all_constant(windows[o])) {
      const auto& win = windows[o];
      std::size_t best = 0;
      for (std::size_t j = 1; j < win.size(); ++j) {
        if (in[win[j]].constant_term() > in[win[best]].constant_term()) best = j;
      }
      choice[o] = static_cast<std::uint32_t>(best);
      out[o] = in[win[best]];
      ++o;
    }
    if (o == windows.size()) {
      run_layer(layer + 1, out);
      return;
    }
    const auto& win = windows[o];
    std::size_t preferred = 0;
    {
      Rational best = eval_exact(in[win[0]], witnesses_.back());
      for (std::size_t j = 1; j < win.size(); ++j) {
        Rational v = eval_exact(in[win[j]], witnesses_.back());
        if (v > best) {
          best = v;
          preferred = j;
        }
      }
    }
    std::vector<std::size_t> order{preferred};
    for (std::size_t k = 0; k < win.size(); ++k) {
      if (k != preferred) order.push_back(k);
    }
    for (std::size_t k : order) {
      if (stop_) return;
      const auto k64 = static_cast<std::int64_t>(k);
      std::vector<ConstraintOutcome> outcomes;
      for (std::size_t j = 0; j < win.size(); ++j) {
        if (j == k) continue;
        outcomes.push_back(make_constraint(in[win[k]] - in[win[j]], pool_relation(j, k),
                                           Provenance{BranchKind::Pool, layer, o, k64}));
      }
      auto constraints = resolve(outcomes);
      if (!constraints || !enter(std::move(*constraints))) continue;
      choice[o] = static_cast<std::uint32_t>(k);
      out[o] = in[win[k]];
      decisions_.push_back(BranchDecision{BranchKind::Pool, layer, o, k64});
      pool_step(layer, in, out, o + 1);
      decisions_.pop_back();
      leave();
    }
  }

  void emit(const SymTensor& logits) {
    if (result_.stats.paths == budget_.max_paths) {
      // Another feasible path exists beyond the budget.
      result_.truncated = true;
      stop_ = true;
      return;
    }
    if (out_of_time()) return;
    ++result_.stats.paths;

    PathResult path;
    path.path_constraint.vars = setup_.vars;
    path.path_constraint.constraints = path_;
    path.symbolic_logits = logits;
    path.pattern = pattern_;
    path.decisions = decisions_;
    path.witness = witnesses_.back();
    const std::vector<double> values = to_doubles(witnesses_.back(), setup_.vars);
    if (marking_.mode == MarkingMode::SymbolicInputs) {
      path.predicted_label = forward(model_, embed_inputs(seed_, marking_, values)).prediction.label;
    } else {
      path.predicted_label = forward(embed_params(model_, marking_, values), seed_).prediction.label;
    }

    if (visitor_ && visitor_(path, *this) == Visit::Stop) stop_ = true;
    if (keep_paths_) result_.paths.push_back(std::move(path));
  }

  struct Frame {
    std::size_t path_size;
    bool new_witness;
  };

  const Model& model_;
  const SymbolicMarking& marking_;
  const Tensor& seed_;
  SymbolicSetup setup_;
  SolverSession session_;
  ExplorationBudget budget_;
  const PathVisitor& visitor_;
  bool keep_paths_;
  Clock::time_point start_;

  ExplorationResult result_;
  bool stop_ = false;
  std::vector<LinearConstraint> path_;
  std::vector<Frame> frames_;
  std::vector<std::vector<Rational>> witnesses_;
  std::vector<BranchDecision> decisions_;
  ActivationPattern pattern_;
  std::map<std::size_t, std::size_t> relu_slot_, pool_slot_;
  std::map<std::size_t, std::vector<std::vector<std::size_t>>> windows_;
};

}  // namespace

ExplorationResult explore_paths(const Model& model, const SymbolicMarking& marking, const Tensor& seed,
                                const ExplorationBudget& budget, const PathVisitor& visitor, bool keep_paths,
                                SolverOptions solver_options) {
  Explorer explorer(model, marking, seed, budget, visitor, keep_paths, solver_options);
  return explorer.run();
}

ExplorationResult explore_paths(const Model& model, const SymbolicMarking& marking, const Tensor& seed,
                                const ExplorationBudget& budget, SolverOptions solver_options) {
  return explore_paths(model, marking, seed, budget, PathVisitor{}, true, solver_options);
}

}  // namespace nnse
