#pragma once

#include "bfmpc/qp.hpp"

namespace bfmpc {

/// Dense linear program
///   max  f^T z   s.t.  Aeq z = beq,  Ain z <= bin   (z free)
/// solved by two-phase simplex. Unboundedness is certified by a ray in
/// phase 2. Tall inequality-only problems are solved through the dual so
/// the basis size stays at the variable count.
///
/// QpSolution.objective holds the attained maximum; in_multipliers the
/// nonnegative row multipliers.
QpSolution solve_lp(const Vector& f, const Matrix& Aeq, const Vector& beq,
                    const Matrix& Ain, const Vector& bin, SolveTolerances tol = {});

/// Inequality-only overload.
QpSolution solve_lp(const Vector& f, const Matrix& Ain, const Vector& bin,
                    SolveTolerances tol = {});

}  // namespace bfmpc
