#include "preform/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace preform {

BoundaryCurve analytic_inverse(const AffineInverseProblem& problem) {
    const double alpha = problem.alpha;
    if (!std::isfinite(alpha)) {
        throw std::invalid_argument("analytic_inverse: alpha must be finite");
    }
    const double det = 1.0 - 2.0 * alpha * alpha;
    if (std::abs(det) <= 1e-12) {
        throw std::domain_error(
            "analytic_inverse: singular at the critical alpha = 1/sqrt(2) (1 - 2*alpha^2 = " +
            format_double(det) + ")");
    }

    std::vector<Point2> initial;
    initial.reserve(problem.desired.size());
    for (const Point2& d : problem.desired.points()) {
        initial.push_back({((1.0 - alpha) * d.x - alpha * d.y) / det,
                           ((1.0 + alpha) * d.y - alpha * d.x) / det});
    }
    return BoundaryCurve(std::move(initial), problem.desired.label());
}

Vector2 recurrence_step(const Jacobian2& jac, SchemeKind scheme, Vector2 residual) {
    const double exx = jac.du_x_dx;
    const double uxy = jac.du_x_dy;
    const double uyx = jac.du_y_dx;
    const double eyy = jac.du_y_dy;

    switch (scheme) {
        case SchemeKind::scheme_i:
            return {-(exx * residual.dx + uxy * residual.dy),
                    -(uyx * residual.dx + eyy * residual.dy)};
        case SchemeKind::scheme_ii: {
            // The decoupling assumes the corrective system is solvable; use
            // the same singularity threshold the solver applies.
            const double a00 = exx + 1.0;
            const double a11 = eyy + 1.0;
            const double det = a00 * a11 - uxy * uyx;
            const double max_entry = std::max(std::max(std::abs(a00), std::abs(uxy)),
                                              std::max(std::abs(uyx), std::abs(a11)));
            if (std::abs(det) <= 1e-12 * std::max(1.0, max_entry * max_entry)) {
                throw SingularSystemError("recurrence_step: corrective system singular "
                                          "(determinant " + format_double(det) + ")",
                                          det, -1);
            }
            return {-exx * residual.dx, -eyy * residual.dy};
        }
        case SchemeKind::scheme_iii: {
            const Vector2 b{-uxy * residual.dy, -uyx * residual.dx};
            return {-exx * (residual.dx + b.dx) - uxy * (residual.dy + b.dy) - b.dx,
                    -uyx * (residual.dx + b.dx) - eyy * (residual.dy + b.dy) - b.dy};
        }
    }
    throw std::logic_error("unknown scheme");
}

std::vector<Vector2> residual_recurrence_oracle(const Jacobian2& jac, SchemeKind scheme,
                                                Vector2 initial_residual, int n_steps) {
    if (n_steps < 0) {
        throw std::invalid_argument("residual_recurrence_oracle: n_steps must be >= 0");
    }
    std::vector<Vector2> sequence;
    sequence.reserve(static_cast<std::size_t>(n_steps));
    Vector2 d = initial_residual;
    for (int k = 0; k < n_steps; ++k) {
        d = recurrence_step(jac, scheme, d);
        sequence.push_back(d);
    }
    return sequence;
}

}  // namespace preform
