#pragma once

#include "preform/fields.hpp"
#include "preform/geometry.hpp"
#include "preform/solver.hpp"

#include <vector>

namespace preform {

/// Inverse problem with a closed-form answer: which geometry deforms into
/// `desired` under the equal-magnitude shear/volumetric field of strength
/// alpha. Solvable whenever |1 - 2*alpha^2| stays away from zero.
struct AffineInverseProblem {
    double alpha = 0.0;
    BoundaryCurve desired;
};

/// Per node, the exact solution (x, y) of
///   (1 + alpha) x + alpha y = x_desired
///   alpha x + (1 - alpha) y = y_desired
/// i.e. x = ((1 - alpha) x_d - alpha y_d) / (1 - 2 alpha^2) and
/// y = ((1 + alpha) y_d - alpha x_d) / (1 - 2 alpha^2).
/// Throws std::domain_error near the critical alpha = 1/sqrt(2).
BoundaryCurve analytic_inverse(const AffineInverseProblem& problem);

/// One step of the exact first-order residual recurrence for a frozen
/// gradient, per scheme:
///   scheme_i:   d' = -J d
///   scheme_ii:  d' = (-du_x_dx * d.dx, -du_y_dy * d.dy), the decoupled form
///               the exact corrective term produces (requires the corrective
///               system to be nonsingular)
///   scheme_iii: the shear-only corrective b is substituted into the full
///               recurrence d' = -J (d + b) - b, assembled term by term
/// This advances residual vectors by pure 2x2 arithmetic, never moving
/// points or evaluating a field, so it is an independent check on the
/// geometric iteration.
Vector2 recurrence_step(const Jacobian2& jac, SchemeKind scheme, Vector2 residual);

/// Applies recurrence_step n_steps times; entry k is the residual after
/// k + 1 steps from initial_residual.
std::vector<Vector2> residual_recurrence_oracle(const Jacobian2& jac, SchemeKind scheme,
                                                Vector2 initial_residual, int n_steps);

}  // namespace preform
