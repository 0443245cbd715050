#include "nnse/solver.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <stdexcept>

#include "nnse/error.hpp"

namespace nnse {

std::string_view to_string(UnknownReason reason) {
  return reason == UnknownReason::Timeout ? "Timeout" : "EpsilonExhausted";
}

Assignment to_assignment(const std::vector<Rational>& values) {
  Assignment out;
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<VarIndex>(i)] = to_double(values[i]);
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double now_seconds() {
  return std::chrono::duration<double>(Clock::now().time_since_epoch()).count();
}

/// r + k*eps for an infinitesimal eps > 0, ordered lexicographically.
struct DeltaRational {
  Rational c;
  Rational k;

  friend DeltaRational operator+(const DeltaRational& a, const DeltaRational& b) { return {a.c + b.c, a.k + b.k}; }
  friend DeltaRational operator-(const DeltaRational& a, const DeltaRational& b) { return {a.c - b.c, a.k - b.k}; }
  friend DeltaRational operator*(const DeltaRational& a, const Rational& s) { return {a.c * s, a.k * s}; }
  friend DeltaRational operator/(const DeltaRational& a, const Rational& s) { return {a.c / s, a.k / s}; }
  friend bool operator<(const DeltaRational& a, const DeltaRational& b) {
    const int cc = cmp(a.c, b.c);
    return cc < 0 || (cc == 0 && a.k < b.k);
  }
  friend bool operator>(const DeltaRational& a, const DeltaRational& b) { return b < a; }
  friend bool operator==(const DeltaRational& a, const DeltaRational& b) { return a.c == b.c && a.k == b.k; }
};

template <typename V>
struct SimplexProblem {
  std::size_t n = 0;                // original variables
  std::size_t m = 0;                // rows, slack s_r = sum_j a[r][j] x_j
  std::vector<Rational> a;          // m x n, row-major
  std::vector<V> lower, upper;      // n originals
  std::vector<V> slack_lower;       // m slacks, unbounded above
};

enum class SimplexOutcome { Feasible, Infeasible, Timeout };

/// Bounded general simplex: basic slack rows, nonbasic originals, repairs
/// bound violations with Bland's rule (smallest variable id first).
/// On success `beta` holds the value of every variable, originals first.
template <typename V>
SimplexOutcome simplex(const SimplexProblem<V>& p, std::vector<V>& beta, double deadline, std::size_t& pivots) {
  const std::size_t n = p.n, m = p.m, total = n + m;
  std::vector<Rational> t = p.a;
  std::vector<std::size_t> basic(m), nonbasic(n);
  std::vector<V> lower(total), upper(total);
  std::vector<bool> has_upper(total, false);
  for (std::size_t j = 0; j < n; ++j) {
    nonbasic[j] = j;
    lower[j] = p.lower[j];
    upper[j] = p.upper[j];
    has_upper[j] = true;
  }
  beta.assign(total, V{});
  for (std::size_t j = 0; j < n; ++j) beta[j] = (lower[j] + upper[j]) / Rational(2);
  for (std::size_t r = 0; r < m; ++r) {
    basic[r] = n + r;
    lower[n + r] = p.slack_lower[r];
    V value{};
    for (std::size_t j = 0; j < n; ++j) {
      if (sgn(t[r * n + j]) != 0) value = value + beta[j] * t[r * n + j];
    }
    beta[n + r] = value;
  }

  auto can_increase = [&](std::size_t v) { return !has_upper[v] || beta[v] < upper[v]; };
  auto can_decrease = [&](std::size_t v) { return beta[v] > lower[v]; };

  for (;;) {
    if (now_seconds() > deadline) return SimplexOutcome::Timeout;
    std::size_t row = m;
    std::size_t row_var = std::numeric_limits<std::size_t>::max();
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t b = basic[r];
      if (b < row_var && (beta[b] < lower[b] || (has_upper[b] && beta[b] > upper[b]))) {
        row = r;
        row_var = b;
      }
    }
    if (row == m) return SimplexOutcome::Feasible;

    const bool raise = beta[row_var] < lower[row_var];
    std::size_t col = n;
    std::size_t col_var = std::numeric_limits<std::size_t>::max();
    for (std::size_t c = 0; c < n; ++c) {
      const int s = sgn(t[row * n + c]);
      if (s == 0 || nonbasic[c] >= col_var) continue;
      const std::size_t v = nonbasic[c];
      const bool ok = raise ? (s > 0 ? can_increase(v) : can_decrease(v)) : (s > 0 ? can_decrease(v) : can_increase(v));
      if (ok) {
        col = c;
        col_var = v;
      }
    }
    if (col == n) return SimplexOutcome::Infeasible;

    // Move the basic variable onto its violated bound, then swap it with the
    // entering nonbasic variable.
    const V target = raise ? lower[row_var] : upper[row_var];
    const Rational pivot = t[row * n + col];
    const V theta = (target - beta[row_var]) / pivot;
    beta[row_var] = target;
    beta[col_var] = beta[col_var] + theta;
    for (std::size_t r = 0; r < m; ++r) {
      if (r != row && sgn(t[r * n + col]) != 0) beta[basic[r]] = beta[basic[r]] + theta * t[r * n + col];
    }

    const Rational inv = 1 / pivot;
    for (std::size_t c = 0; c < n; ++c) {
      if (c == col) {
        t[row * n + c] = inv;
      } else if (sgn(t[row * n + c]) != 0) {
        t[row * n + c] = -t[row * n + c] * inv;
      }
    }
    for (std::size_t r = 0; r < m; ++r) {
      if (r == row) continue;
      const Rational factor = t[r * n + col];
      if (sgn(factor) == 0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        if (c == col) {
          t[r * n + c] = factor * inv;
        } else if (sgn(t[row * n + c]) != 0) {
          t[r * n + c] += factor * t[row * n + c];
        }
      }
    }
    std::swap(basic[row], nonbasic[col]);
    ++pivots;
  }
}

constexpr int kHalvings = 20;

Rational initial_delta() { return Rational(1, 1000000); }

}  // namespace

SolverSession::SolverSession(std::vector<SymVar> vars, SolverOptions options)
    : vars_(std::move(vars)), options_(options) {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const SymVar& v = vars_[i];
    if (v.index != i) throw Error(ErrorCode::InvalidArgument, "solver variables must be indexed 0..n-1 in order");
    if (!(v.lower <= v.upper)) throw Error(ErrorCode::InvalidArgument, "variable " + v.name + " has lower > upper");
    box_lo_.push_back(to_rational(v.lower));
    box_hi_.push_back(to_rational(v.upper));
    lo_.push_back(Bound{box_lo_.back(), false, false, Rational(0)});
    hi_.push_back(Bound{box_hi_.back(), false, false, Rational(0)});
  }
}

Rational SolverSession::span_of(const std::vector<std::pair<VarIndex, Rational>>& coeffs) const {
  Rational span = 0;
  for (const auto& [v, a] : coeffs) span += abs(a) * (box_hi_[v] - box_lo_[v]);
  if (sgn(span) == 0) span = 1;
  return span;
}

void SolverSession::add_constraint(const LinearConstraint& c, Frame& frame) {
  std::vector<std::pair<VarIndex, Rational>> coeffs;
  for (const Term& term : c.expr().terms()) {
    if (term.var >= vars_.size()) {
      throw Error(ErrorCode::UnboundVariable, "constraint mentions v" + std::to_string(term.var) + " with no bounds");
    }
    coeffs.emplace_back(term.var, to_rational(term.coeff));
  }
  const Rational constant = to_rational(c.expr().constant_term());
  const Rational span = span_of(coeffs);

  if (coeffs.size() == 1) {
    // a*x + c (>|>=) 0  becomes a bound on x.
    const auto& [var, a] = coeffs.front();
    const Rational value = -constant / a;
    const bool upper = sgn(a) < 0;
    Bound candidate{value, c.strict(), true, span / abs(a)};
    Bound& current = upper ? hi_[var] : lo_[var];
    const int order = cmp(candidate.value, current.value);
    const bool tighter = upper ? order < 0 : order > 0;
    if (tighter || (order == 0 && candidate.strict && !current.strict)) {
      frame.changes.push_back(BoundChange{var, upper, current});
      current = std::move(candidate);
    }
    return;
  }
  rows_.push_back(Row{std::move(coeffs), constant, c.strict(), span});
}

void SolverSession::push(std::span<const LinearConstraint> constraints) {
  Frame frame;
  frame.rows_before = rows_.size();
  frame.constraints_before = stack_.size();
  for (const LinearConstraint& c : constraints) {
    add_constraint(c, frame);
    stack_.push_back(c);
  }
  frames_.push_back(std::move(frame));
  ++stats_.pushes;
}

void SolverSession::push(const LinearConstraint& constraint) { push(std::span<const LinearConstraint>(&constraint, 1)); }

void SolverSession::pop() {
  if (frames_.empty()) throw Error(ErrorCode::StackUnderflow, "pop on an empty solver stack");
  Frame& frame = frames_.back();
  for (auto it = frame.changes.rbegin(); it != frame.changes.rend(); ++it) {
    (it->upper ? hi_ : lo_)[it->var] = std::move(it->previous);
  }
  rows_.resize(frame.rows_before);
  stack_.erase(stack_.begin() + static_cast<std::ptrdiff_t>(frame.constraints_before), stack_.end());
  frames_.pop_back();
  ++stats_.pops;
}

std::vector<LinearConstraint> SolverSession::constraints() const { return stack_; }

SolverSession::Outcome SolverSession::solve(MarginMode mode, const Rational& delta, std::vector<Rational>& witness,
                                            double deadline) {
  const std::size_t n = vars_.size();
  SimplexProblem<Rational> p;
  p.n = n;
  p.m = rows_.size();
  p.lower.resize(n);
  p.upper.resize(n);
  auto margin = [&](const Bound& b) -> Rational {
    if (!b.derived || !(mode == MarginMode::All || b.strict)) return 0;
    return delta * b.margin_unit;
  };
  for (std::size_t j = 0; j < n; ++j) {
    p.lower[j] = lo_[j].value + margin(lo_[j]);
    p.upper[j] = hi_[j].value - margin(hi_[j]);
    if (p.lower[j] > p.upper[j]) return Outcome::Infeasible;
  }
  if (rows_.empty()) {
    witness.resize(n);
    for (std::size_t j = 0; j < n; ++j) witness[j] = (p.lower[j] + p.upper[j]) / 2;
    return Outcome::Feasible;
  }
  p.a.assign(p.m * n, Rational(0));
  p.slack_lower.resize(p.m);
  for (std::size_t r = 0; r < p.m; ++r) {
    const Row& row = rows_[r];
    for (const auto& [v, a] : row.coeffs) p.a[r * n + v] = a;
    p.slack_lower[r] = -row.constant;
    if (mode == MarginMode::All || row.strict) p.slack_lower[r] += delta * row.span;
  }
  std::vector<Rational> beta;
  ++stats_.simplex_runs;
  switch (simplex(p, beta, deadline, stats_.pivots)) {
    case SimplexOutcome::Timeout: return Outcome::Timeout;
    case SimplexOutcome::Infeasible: return Outcome::Infeasible;
    case SimplexOutcome::Feasible: break;
  }
  witness.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(n));
  return Outcome::Feasible;
}

bool SolverSession::validate(const std::vector<Rational>& witness) const {
  if (witness.size() != vars_.size()) return false;
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    if (witness[j] < box_lo_[j] || witness[j] > box_hi_[j]) return false;
  }
  return std::all_of(stack_.begin(), stack_.end(), [&](const LinearConstraint& c) { return holds_exact(c, witness); });
}

SolverResult SolverSession::check() {
  const double start = now_seconds();
  const double deadline = start + options_.timeout_seconds;
  ++stats_.checks;
  struct Timer {
    SolverStats& stats;
    double start;
    ~Timer() { stats.seconds += now_seconds() - start; }
  } timer{stats_, start};

  auto accept = [&](std::vector<Rational> witness) -> SolverResult {
    if (!validate(witness)) throw std::logic_error("solver produced a witness that violates the constraint stack");
    return Sat{std::move(witness)};
  };

  bool any_derived = !rows_.empty();
  bool any_strict = false;
  for (const Row& r : rows_) any_strict = any_strict || r.strict;
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    any_derived = any_derived || lo_[j].derived || hi_[j].derived;
    any_strict = any_strict || lo_[j].strict || hi_[j].strict;
  }

  std::vector<Rational> witness;
  const Rational delta0 = initial_delta();

  // Interior attempt: margin on every constraint, so the witness does not sit
  // on a region boundary when the region has room.
  if (any_derived) {
    switch (solve(MarginMode::All, delta0, witness, deadline)) {
      case Outcome::Feasible: return accept(std::move(witness));
      case Outcome::Timeout: return Unknown{UnknownReason::Timeout};
      case Outcome::Infeasible: break;
    }
  }

  // Non-strict relaxation. Infeasible here is a proof of Unsat.
  switch (solve(MarginMode::StrictOnly, Rational(0), witness, deadline)) {
    case Outcome::Infeasible: return Unsat{};
    case Outcome::Timeout: return Unknown{UnknownReason::Timeout};
    case Outcome::Feasible:
      if (!any_strict) return accept(std::move(witness));
      break;
  }

  Rational delta = delta0;
  for (int k = 0; k <= kHalvings; ++k, delta /= 2) {
    switch (solve(MarginMode::StrictOnly, delta, witness, deadline)) {
      case Outcome::Feasible: return accept(std::move(witness));
      case Outcome::Timeout: return Unknown{UnknownReason::Timeout};
      case Outcome::Infeasible: break;
    }
  }

  // Relaxation feasible but no tested margin works: decide exactly with an
  // infinitesimal margin on the strict constraints.
  const std::size_t n = vars_.size();
  SimplexProblem<DeltaRational> p;
  p.n = n;
  p.m = rows_.size();
  p.lower.resize(n);
  p.upper.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    p.lower[j] = DeltaRational{lo_[j].value, Rational(lo_[j].strict ? 1 : 0)};
    p.upper[j] = DeltaRational{hi_[j].value, Rational(hi_[j].strict ? -1 : 0)};
    if (p.lower[j] > p.upper[j]) return Unsat{};
  }
  p.a.assign(p.m * n, Rational(0));
  p.slack_lower.resize(p.m);
  for (std::size_t r = 0; r < p.m; ++r) {
    for (const auto& [v, a] : rows_[r].coeffs) p.a[r * n + v] = a;
    p.slack_lower[r] = DeltaRational{-rows_[r].constant, Rational(rows_[r].strict ? 1 : 0)};
  }
  std::vector<DeltaRational> beta;
  if (p.m == 0) {
    beta.resize(n);
    for (std::size_t j = 0; j < n; ++j) beta[j] = (p.lower[j] + p.upper[j]) / Rational(2);
  } else {
    ++stats_.simplex_runs;
    switch (simplex(p, beta, deadline, stats_.pivots)) {
      case SimplexOutcome::Infeasible: return Unsat{};
      case SimplexOutcome::Timeout: return Unknown{UnknownReason::Timeout};
      case SimplexOutcome::Feasible: break;
    }
  }

  // Pick a concrete eps that keeps every bound relation true.
  Rational eps = 1;
  auto restrict_eps = [&](const DeltaRational& low, const DeltaRational& high) {
    if (low.c < high.c && low.k > high.k) {
      const Rational limit = (high.c - low.c) / (low.k - high.k);
      if (limit < eps) eps = limit;
    }
  };
  for (std::size_t j = 0; j < n; ++j) {
    restrict_eps(p.lower[j], beta[j]);
    restrict_eps(beta[j], p.upper[j]);
  }
  for (std::size_t r = 0; r < p.m; ++r) restrict_eps(p.slack_lower[r], beta[n + r]);
  eps /= 2;
  witness.resize(n);
  for (std::size_t j = 0; j < n; ++j) witness[j] = beta[j].c + beta[j].k * eps;
  if (!validate(witness)) return Unknown{UnknownReason::EpsilonExhausted};
  return Sat{std::move(witness)};
}

std::string smt_constraint(const LinearConstraint& c) {
  std::vector<std::string> parts;
  const Rational constant = to_rational(c.expr().constant_term());
  if (sgn(constant) != 0) parts.push_back(smt_literal(constant));
  for (const Term& t : c.expr().terms()) {
    parts.push_back("(* " + smt_literal(to_rational(t.coeff)) + " v" + std::to_string(t.var) + ")");
  }
  std::string lhs;
  if (parts.size() == 1) {
    lhs = parts.front();
  } else {
    lhs = "(+";
    for (const auto& part : parts) lhs += " " + part;
    lhs += ")";
  }
  return std::string("(") + (c.strict() ? ">" : ">=") + " " + lhs + " 0.0)";
}

std::string SolverSession::export_smtlib() const {
  std::string out = export_declarations();
  out += "(check-sat)\n(get-model)\n";
  return out;
}

std::string SolverSession::export_smtlib(const std::vector<std::vector<LinearConstraint>>& any_of) const {
  std::string out = export_declarations();
  std::vector<std::string> alternatives;
  for (const auto& conj : any_of) {
    if (conj.empty()) {
      alternatives.push_back("true");
    } else if (conj.size() == 1) {
      alternatives.push_back(smt_constraint(conj.front()));
    } else {
      std::string a = "(and";
      for (const auto& c : conj) a += " " + smt_constraint(c);
      alternatives.push_back(a + ")");
    }
  }
  if (alternatives.empty()) {
    out += "(assert false)\n";
  } else if (alternatives.size() == 1) {
    out += "(assert " + alternatives.front() + ")\n";
  } else {
    out += "(assert (or";
    for (const auto& a : alternatives) out += "\n  " + a;
    out += "))\n";
  }
  out += "(check-sat)\n(get-model)\n";
  return out;
}

std::string SolverSession::export_declarations() const {
  std::string out;
  out += "(set-info :smt-lib-version 2.6)\n";
  out += "(set-logic QF_LRA)\n";
  for (const SymVar& v : vars_) {
    out += "(declare-fun v" + std::to_string(v.index) + " () Real)";
    if (!v.name.empty()) out += " ; " + v.name;
    out += "\n";
  }
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const std::string name = "v" + std::to_string(j);
    out += "(assert (>= " + name + " " + smt_literal(box_lo_[j]) + "))\n";
    out += "(assert (<= " + name + " " + smt_literal(box_hi_[j]) + "))\n";
  }
  for (const LinearConstraint& c : stack_) out += "(assert " + smt_constraint(c) + ")\n";
  return out;
}

}  // namespace nnse
