#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nnse/affine.hpp"
#include "nnse/rational.hpp"

namespace nnse {

struct SolverOptions {
  double timeout_seconds = 10.0;
};

struct SolverStats {
  std::size_t checks = 0;
  std::size_t simplex_runs = 0;
  std::size_t pivots = 0;
  std::size_t pushes = 0;
  std::size_t pops = 0;
  double seconds = 0.0;
};

enum class UnknownReason { EpsilonExhausted, Timeout };

std::string_view to_string(UnknownReason reason);

struct Sat {
  std::vector<Rational> assignment;  // indexed by variable index
};
struct Unsat {};
struct Unknown {
  UnknownReason reason = UnknownReason::EpsilonExhausted;
};

using SolverResult = std::variant<Sat, Unsat, Unknown>;

inline bool is_sat(const SolverResult& r) { return std::holds_alternative<Sat>(r); }
inline bool is_unsat(const SolverResult& r) { return std::holds_alternative<Unsat>(r); }

Assignment to_assignment(const std::vector<Rational>& values);

/// `(> lhs 0.0)` or `(>= lhs 0.0)` over variables named v<index>.
std::string smt_constraint(const LinearConstraint& constraint);

/// Feasibility of a stack of strict / non-strict linear constraints over
/// box-bounded real variables, decided in exact rational arithmetic.
///
/// Constraints over a single variable are folded into that variable's bounds
/// when pushed; the remaining rows go to a bounded simplex (Bland's rule).
/// Strict inequalities e > 0 are solved as e >= delta * span(e), with delta
/// starting at 1e-6 and halved up to 20 times; span(e) is the range of the
/// linear part of e over the variable box. Before that, every constraint is
/// tried with the initial margin so that witnesses sit inside their region
/// when it has room. Every Sat witness is re-checked exactly against the
/// original constraints.
///
/// check() is a function of the current stack contents only: the same stack
/// always yields the same result and witness.
class SolverSession {
 public:
  explicit SolverSession(std::vector<SymVar> vars, SolverOptions options = {});

  void push(std::span<const LinearConstraint> constraints);
  void push(const LinearConstraint& constraint);
  /// Throws StackUnderflow when no frame is open.
  void pop();

  SolverResult check();

  /// QF_LRA script: variable declarations, bound asserts, one assert per
  /// stacked constraint, (check-sat) and (get-model).
  std::string export_smtlib() const;
  /// Same, additionally asserting that at least one of the conjunctions
  /// holds. An empty conjunction is `true`; an empty list asserts `false`.
  std::string export_smtlib(const std::vector<std::vector<LinearConstraint>>& any_of) const;

  std::size_t depth() const noexcept { return frames_.size(); }
  const SolverStats& stats() const noexcept { return stats_; }
  const std::vector<SymVar>& vars() const noexcept { return vars_; }
  std::vector<LinearConstraint> constraints() const;

 private:
  struct Bound {
    Rational value;
    bool strict = false;
    bool derived = false;   // tightened by a constraint rather than the box
    Rational margin_unit;   // how far `delta` moves this bound
  };
  struct Row {
    std::vector<std::pair<VarIndex, Rational>> coeffs;
    Rational constant;
    bool strict = false;
    Rational span;
  };
  struct BoundChange {
    VarIndex var;
    bool upper;
    Bound previous;
  };
  struct Frame {
    std::size_t rows_before = 0;
    std::size_t constraints_before = 0;
    std::vector<BoundChange> changes;
  };
  enum class MarginMode { All, StrictOnly };
  enum class Outcome { Feasible, Infeasible, Timeout };

  std::string export_declarations() const;
  void add_constraint(const LinearConstraint& c, Frame& frame);
  Rational span_of(const std::vector<std::pair<VarIndex, Rational>>& coeffs) const;
  Outcome solve(MarginMode mode, const Rational& delta, std::vector<Rational>& witness, double deadline);
  bool validate(const std::vector<Rational>& witness) const;

  std::vector<SymVar> vars_;
  SolverOptions options_;
  std::vector<Rational> box_lo_, box_hi_;
  std::vector<Bound> lo_, hi_;
  std::vector<Row> rows_;
  std::vector<LinearConstraint> stack_;
  std::vector<Frame> frames_;
  SolverStats stats_;
};

}  // namespace nnse
