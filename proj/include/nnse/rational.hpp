#pragma once

#include <span>
#include <string>

#include <gmpxx.h>

#include "nnse/affine.hpp"

namespace nnse {

using Rational = mpq_class;

/// Exact value of a finite double (binary fraction).
Rational to_rational(double value);

/// Nearest-toward-zero double of a rational.
double to_double(const Rational& value);

/// Exact evaluation; `values` is indexed by variable index. Throws
/// UnboundVariable for a variable index past the end.
Rational eval_exact(const AffineExpr& expr, std::span<const Rational> values);
bool holds_exact(const LinearConstraint& constraint, std::span<const Rational> values);

/// SMT-LIB2 real literal: `3.0`, `(- 3.0)`, `(/ 1.0 4.0)`, `(- (/ 1.0 4.0))`.
std::string smt_literal(const Rational& value);

}  // namespace nnse
