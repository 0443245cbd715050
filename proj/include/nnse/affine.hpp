#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace nnse {

using VarIndex = std::uint32_t;

/// A symbolic variable with its box bounds.
struct SymVar {
  VarIndex index = 0;
  std::string name;
  double lower = 0.0;
  double upper = 0.0;

  friend bool operator==(const SymVar&, const SymVar&) = default;
};

struct Term {
  VarIndex var = 0;
  double coeff = 0.0;

  friend bool operator==(const Term&, const Term&) = default;
};

using Assignment = std::map<VarIndex, double>;

/// constant + sum(coeff * var). Terms are kept sorted by variable index and no
/// stored coefficient is ever zero.
class AffineExpr {
 public:
  AffineExpr() = default;

  static AffineExpr constant(double value);
  static AffineExpr variable(VarIndex var, double coeff = 1.0);
  /// Sorts, merges duplicate variables and drops zero coefficients.
  static AffineExpr from_terms(double constant, std::vector<Term> terms);

  double constant_term() const noexcept { return constant_; }
  std::span<const Term> terms() const noexcept { return terms_; }
  bool is_constant() const noexcept { return terms_.empty(); }
  double coefficient(VarIndex var) const noexcept;

  /// Throws UnboundVariable when a variable is missing from the assignment.
  double eval(const Assignment& assignment) const;

  AffineExpr operator-() const;
  friend AffineExpr operator+(const AffineExpr& a, const AffineExpr& b);
  friend AffineExpr operator-(const AffineExpr& a, const AffineExpr& b);
  friend AffineExpr operator*(const AffineExpr& a, double k);

  friend bool operator==(const AffineExpr&, const AffineExpr&) = default;

 private:
  AffineExpr(double constant, std::vector<Term> terms);
  double constant_ = 0.0;
  std::vector<Term> terms_;
};

AffineExpr affine_add(const AffineExpr& a, const AffineExpr& b);
AffineExpr affine_scale(const AffineExpr& a, double k);
double affine_eval(const AffineExpr& a, const Assignment& assignment);

/// expr > 0 or expr >= 0.
enum class Relation { GT0, GE0 };

enum class BranchKind { Relu, Pool, Decision };

/// Where a constraint came from. `branch` is 1/0 for an active/inactive ReLU,
/// the selected in-window index for a pool, or the target class for a
/// decision constraint.
struct Provenance {
  BranchKind kind = BranchKind::Relu;
  std::size_t layer = 0;
  std::size_t index = 0;
  std::int64_t branch = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// A relation over a non-constant affine expression.
class LinearConstraint {
 public:
  /// Throws InvalidArgument when `expr` has no terms.
  LinearConstraint(AffineExpr expr, Relation relation, Provenance provenance = {});

  const AffineExpr& expr() const noexcept { return expr_; }
  Relation relation() const noexcept { return relation_; }
  bool strict() const noexcept { return relation_ == Relation::GT0; }
  const Provenance& provenance() const noexcept { return provenance_; }

  bool holds(const Assignment& assignment) const;

  friend bool operator==(const LinearConstraint&, const LinearConstraint&) = default;

 private:
  AffineExpr expr_;
  Relation relation_;
  Provenance provenance_;
};

struct Tautology {};
struct Contradiction {};

using ConstraintOutcome = std::variant<LinearConstraint, Tautology, Contradiction>;

bool relation_holds(Relation relation, double value) noexcept;

/// Builds `expr relation 0`, resolving constant expressions immediately.
ConstraintOutcome make_constraint(AffineExpr expr, Relation relation, Provenance provenance);

/// ReLU branch condition: active means pre > 0, inactive means -pre >= 0.
ConstraintOutcome constraint_from_branch(const AffineExpr& pre_activation, bool taken_active, Provenance provenance);

/// Conjunction of constraints collected along one path, plus the variables
/// (and their bounds) they range over.
struct PathConstraint {
  std::vector<SymVar> vars;
  std::vector<LinearConstraint> constraints;

  bool holds(const Assignment& assignment) const;
};

/// `c + a1*v1 + ... > 0` (or `>=`), variables printed by name.
std::string render(const AffineExpr& expr, std::span<const SymVar> vars);
std::string render(const LinearConstraint& constraint, std::span<const SymVar> vars);

}  // namespace nnse
