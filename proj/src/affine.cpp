#include "nnse/affine.hpp"

#include <algorithm>
#include <cmath>

#include "nnse/error.hpp"
#include "nnse/tensor_io.hpp"

namespace nnse {

namespace {

double checked(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteActivation, "symbolic coefficient overflow");
  return v;
}

}  // namespace

AffineExpr::AffineExpr(double constant, std::vector<Term> terms)
    : constant_(checked(constant) + 0.0), terms_(std::move(terms)) {}

AffineExpr AffineExpr::constant(double value) { return AffineExpr(value, {}); }

AffineExpr AffineExpr::variable(VarIndex var, double coeff) {
  if (coeff == 0.0) return AffineExpr();
  return AffineExpr(0.0, {Term{var, checked(coeff)}});
}

AffineExpr AffineExpr::from_terms(double constant, std::vector<Term> terms) {
  std::stable_sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  std::vector<Term> merged;
  merged.reserve(terms.size());
  for (const Term& t : terms) {
    if (!merged.empty() && merged.back().var == t.var) {
      merged.back().coeff += t.coeff;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const Term& t) { return t.coeff == 0.0; });
  for (const Term& t : merged) checked(t.coeff);
  return AffineExpr(constant, std::move(merged));
}

double AffineExpr::coefficient(VarIndex var) const noexcept {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), var, [](const Term& t, VarIndex v) { return t.var < v; });
  return it != terms_.end() && it->var == var ? it->coeff : 0.0;
}

double AffineExpr::eval(const Assignment& assignment) const {
  double value = constant_;
  for (const Term& t : terms_) {
    auto it = assignment.find(t.var);
    if (it == assignment.end()) throw Error(ErrorCode::UnboundVariable, "variable v" + std::to_string(t.var));
    value += t.coeff * it->second;
  }
  return value;
}

AffineExpr AffineExpr::operator-() const { return *this * -1.0; }

AffineExpr operator+(const AffineExpr& a, const AffineExpr& b) {
  std::vector<Term> out;
  out.reserve(a.terms_.size() + b.terms_.size());
  auto i = a.terms_.begin();
  auto j = b.terms_.begin();
  while (i != a.terms_.end() || j != b.terms_.end()) {
    if (j == b.terms_.end() || (i != a.terms_.end() && i->var < j->var)) {
      out.push_back(*i++);
    } else if (i == a.terms_.end() || j->var < i->var) {
      out.push_back(*j++);
    } else {
      const double c = checked(i->coeff + j->coeff);
      if (c != 0.0) out.push_back(Term{i->var, c});
      ++i;
      ++j;
    }
  }
  return AffineExpr(a.constant_ + b.constant_, std::move(out));
}

AffineExpr operator-(const AffineExpr& a, const AffineExpr& b) { return a + (-b); }

AffineExpr operator*(const AffineExpr& a, double k) {
  if (k == 0.0) return AffineExpr();
  std::vector<Term> out;
  out.reserve(a.terms_.size());
  for (const Term& t : a.terms_) {
    const double c = checked(t.coeff * k);
    if (c != 0.0) out.push_back(Term{t.var, c});  // underflow to zero
  }
  return AffineExpr(a.constant_ * k, std::move(out));
}

AffineExpr affine_add(const AffineExpr& a, const AffineExpr& b) { return a + b; }
AffineExpr affine_scale(const AffineExpr& a, double k) { return a * k; }
double affine_eval(const AffineExpr& a, const Assignment& assignment) { return a.eval(assignment); }

LinearConstraint::LinearConstraint(AffineExpr expr, Relation relation, Provenance provenance)
    : expr_(std::move(expr)), relation_(relation), provenance_(provenance) {
  if (expr_.is_constant()) throw Error(ErrorCode::InvalidArgument, "constraint over a constant expression");
}

bool LinearConstraint::holds(const Assignment& assignment) const {
  return relation_holds(relation_, expr_.eval(assignment));
}

bool relation_holds(Relation relation, double value) noexcept {
  return relation == Relation::GT0 ? value > 0.0 : value >= 0.0;
}

ConstraintOutcome make_constraint(AffineExpr expr, Relation relation, Provenance provenance) {
  if (expr.is_constant()) {
    if (relation_holds(relation, expr.constant_term())) return Tautology{};
    return Contradiction{};
  }
  return LinearConstraint(std::move(expr), relation, provenance);
}

ConstraintOutcome constraint_from_branch(const AffineExpr& pre_activation, bool taken_active, Provenance provenance) {
  provenance.branch = taken_active ? 1 : 0;
  if (taken_active) return make_constraint(pre_activation, Relation::GT0, provenance);
  return make_constraint(-pre_activation, Relation::GE0, provenance);
}

bool PathConstraint::holds(const Assignment& assignment) const {
  for (const SymVar& v : vars) {
    auto it = assignment.find(v.index);
    if (it == assignment.end()) throw Error(ErrorCode::UnboundVariable, v.name);
    if (it->second < v.lower || it->second > v.upper) return false;
  }
  return std::all_of(constraints.begin(), constraints.end(),
                     [&](const LinearConstraint& c) { return c.holds(assignment); });
}

std::string render(const AffineExpr& expr, std::span<const SymVar> vars) {
  std::string out = format_double(expr.constant_term());
  for (const Term& t : expr.terms()) {
    out += " + ";
    out += format_double(t.coeff);
    out += '*';
    if (t.var < vars.size() && vars[t.var].index == t.var) {
      out += vars[t.var].name;
    } else {
      out += "v" + std::to_string(t.var);
    }
  }
  return out;
}

std::string render(const LinearConstraint& constraint, std::span<const SymVar> vars) {
  return render(constraint.expr(), vars) + (constraint.strict() ? " > 0" : " >= 0");
}

}  // namespace nnse
