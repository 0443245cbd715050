#include "nnse/rational.hpp"

#include <cmath>

#include "nnse/error.hpp"

namespace nnse {

Rational to_rational(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::InvalidArgument, "cannot convert non-finite value to rational");
  return Rational(value);
}

double to_double(const Rational& value) { return value.get_d(); }

Rational eval_exact(const AffineExpr& expr, std::span<const Rational> values) {
  Rational total = to_rational(expr.constant_term());
  for (const Term& t : expr.terms()) {
    if (t.var >= values.size()) throw Error(ErrorCode::UnboundVariable, "variable v" + std::to_string(t.var));
    total += to_rational(t.coeff) * values[t.var];
  }
  return total;
}

bool holds_exact(const LinearConstraint& constraint, std::span<const Rational> values) {
  const int s = sgn(eval_exact(constraint.expr(), values));
  return constraint.strict() ? s > 0 : s >= 0;
}

std::string smt_literal(const Rational& value) {
  const bool negative = sgn(value) < 0;
  const Rational magnitude = abs(value);
  std::string body;
  if (magnitude.get_den() == 1) {
    body = magnitude.get_num().get_str() + ".0";
  } else {
    body = "(/ " + magnitude.get_num().get_str() + ".0 " + magnitude.get_den().get_str() + ".0)";
  }
  return negative ? "(- " + body + ")" : body;
}

}  // namespace nnse
