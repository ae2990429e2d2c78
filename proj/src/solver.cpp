#include "preform/solver.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace preform {

namespace {

void validate_config(const SolverConfig& config) {
    if (!std::isfinite(config.epsilon) || config.epsilon <= 0.0) {
        throw std::invalid_argument("SolverConfig: epsilon must be positive and finite");
    }
    if (config.max_iterations < 1) {
        throw std::invalid_argument("SolverConfig: max_iterations must be >= 1");
    }
}

double max_norm(const std::vector<Vector2>& vs) {
    double m = 0.0;
    for (const Vector2& v : vs) {
        m = std::max(m, v.norm());
    }
    return m;
}

std::vector<Vector2> checked_batch(const DisplacementField& field,
                                   const std::vector<Point2>& points) {
    auto u = field.evaluate_batch(points);
    if (u.size() != points.size()) {
        throw std::runtime_error("DisplacementField: batch returned " +
                                 std::to_string(u.size()) + " displacements for " +
                                 std::to_string(points.size()) + " points");
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!is_finite(u[i])) {
            throw std::runtime_error("DisplacementField: non-finite displacement at node " +
                                     std::to_string(i));
        }
    }
    return u;
}

std::vector<Jacobian2> compute_jacobians(const BoundaryCurve& desired,
                                         const DisplacementField& field,
                                         const SolverConfig& config) {
    if (config.jacobian_mode.kind == JacobianMode::Kind::analytic) {
        if (field.jacobian_capability() != JacobianCapability::analytic) {
            throw std::runtime_error(
                "field has no analytic jacobian; use finite differences");
        }
        std::vector<Jacobian2> jacs;
        jacs.reserve(desired.size());
        for (const Point2& p : desired.points()) {
            jacs.push_back(field.jacobian(p));
        }
        return jacs;
    }
    const double h = config.jacobian_mode.step > 0.0 ? config.jacobian_mode.step
                                                     : default_fd_step(desired);
    return fd_jacobians(field, desired.points(), h);
}

Vector2 corrective_for(SchemeKind scheme, const Jacobian2& jac, Vector2 prev_residual,
                       SingularFallback fallback, std::ptrdiff_t point_index,
                       bool* used_fallback) {
    switch (scheme) {
        case SchemeKind::scheme_i:
            return {0.0, 0.0};
        case SchemeKind::scheme_ii:
            return corrective_scheme_ii(jac, prev_residual, fallback, point_index,
                                        used_fallback);
        case SchemeKind::scheme_iii:
            return corrective_scheme_iii(jac, prev_residual);
    }
    throw std::logic_error("unknown scheme");
}

}  // namespace

std::string to_string(SchemeKind scheme) {
    switch (scheme) {
        case SchemeKind::scheme_i: return "I";
        case SchemeKind::scheme_ii: return "II";
        case SchemeKind::scheme_iii: return "III";
    }
    return "?";
}

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iterations_reached: return "max_iterations_reached";
        case SolveStatus::diverged: return "diverged";
    }
    return "?";
}

SingularSystemError::SingularSystemError(std::string message, double determinant,
                                         std::ptrdiff_t point_index)
    : std::runtime_error(std::move(message)),
      determinant_(determinant),
      point_index_(point_index) {}

Vector2 corrective_scheme_ii(const Jacobian2& jac, Vector2 prev_residual,
                             SingularFallback fallback, std::ptrdiff_t point_index,
                             bool* used_fallback) {
    const double a00 = jac.du_x_dx + 1.0;
    const double a01 = jac.du_x_dy;
    const double a10 = jac.du_y_dx;
    const double a11 = jac.du_y_dy + 1.0;
    const double rhs_x = -jac.du_x_dy * prev_residual.dy;
    const double rhs_y = -jac.du_y_dx * prev_residual.dx;

    const double det = a00 * a11 - a01 * a10;
    const double max_entry = std::max(std::max(std::abs(a00), std::abs(a01)),
                                      std::max(std::abs(a10), std::abs(a11)));
    if (std::abs(det) <= 1e-12 * std::max(1.0, max_entry * max_entry)) {
        if (used_fallback) *used_fallback = true;
        switch (fallback) {
            case SingularFallback::scheme_iii:
                return corrective_scheme_iii(jac, prev_residual);
            case SingularFallback::scheme_i:
                return {0.0, 0.0};
            case SingularFallback::fail:
                throw SingularSystemError(
                    "corrective system singular at node " + std::to_string(point_index) +
                        " (determinant " + format_double(det) + ")",
                    det, point_index);
        }
    }
    return {(rhs_x * a11 - a01 * rhs_y) / det, (a00 * rhs_y - rhs_x * a10) / det};
}

Vector2 corrective_scheme_iii(const Jacobian2& jac, Vector2 prev_residual) {
    return {-jac.du_x_dy * prev_residual.dy, -jac.du_y_dx * prev_residual.dx};
}

FirstIterationResult first_iteration(const BoundaryCurve& desired,
                                     const DisplacementField& field,
                                     const SolverConfig& config) {
    validate_config(config);

    const std::vector<Point2>& m = desired.points();
    const std::vector<Vector2> u = checked_batch(field, m);

    const std::size_t count = m.size();
    std::vector<Point2> n(count);
    std::vector<Vector2> residuals(count);
    for (std::size_t i = 0; i < count; ++i) {
        n[i] = m[i] + u[i];
        residuals[i] = desired[i] - n[i];
    }

    std::vector<Jacobian2> jacobians;
    try {
        jacobians = compute_jacobians(desired, field, config);
    } catch (const std::exception&) {
        // Schemes ii and iii cannot proceed without gradients; scheme i
        // never reads them, so the cache just stays empty.
        if (config.scheme != SchemeKind::scheme_i) throw;
    }

    IterationRecord record{
        1,
        desired,
        BoundaryCurve(std::move(n), desired.label()),
        std::move(residuals),
        std::vector<Vector2>(count, Vector2{0.0, 0.0}),
        0.0,
        0,
    };
    record.max_residual_norm = max_norm(record.residuals);
    return {std::move(record), std::move(jacobians)};
}

IterationRecord iterate_step(const IterationRecord& prev, const BoundaryCurve& desired,
                             const DisplacementField& field,
                             std::span<const Jacobian2> cached_jacobians,
                             const SolverConfig& config) {
    const std::size_t count = desired.size();
    if (prev.m_points.size() != count || prev.residuals.size() != count) {
        throw std::invalid_argument("iterate_step: previous record size mismatch");
    }
    if (config.scheme != SchemeKind::scheme_i && cached_jacobians.size() != count) {
        throw std::invalid_argument(
            "iterate_step: cached jacobian count does not match node count");
    }

    std::vector<Point2> m(count);
    std::vector<Vector2> correctives(count);
    int singular_fallbacks = 0;
    for (std::size_t i = 0; i < count; ++i) {
        bool used_fallback = false;
        const Jacobian2 jac = config.scheme == SchemeKind::scheme_i
                                  ? Jacobian2{}
                                  : cached_jacobians[i];
        correctives[i] =
            corrective_for(config.scheme, jac, prev.residuals[i], config.singular_fallback,
                           static_cast<std::ptrdiff_t>(i), &used_fallback);
        if (used_fallback) ++singular_fallbacks;
        m[i] = prev.m_points[i] + (prev.residuals[i] + correctives[i]);
    }

    const std::vector<Vector2> u = checked_batch(field, m);
    std::vector<Point2> n(count);
    std::vector<Vector2> residuals(count);
    for (std::size_t i = 0; i < count; ++i) {
        n[i] = m[i] + u[i];
        residuals[i] = desired[i] - n[i];
    }

    IterationRecord record{
        prev.j + 1,
        BoundaryCurve(std::move(m), desired.label()),
        BoundaryCurve(std::move(n), desired.label()),
        std::move(residuals),
        std::move(correctives),
        0.0,
        singular_fallbacks,
    };
    record.max_residual_norm = max_norm(record.residuals);
    return record;
}

ConvergenceReport solve(const BoundaryCurve& desired, const DisplacementField& field,
                        const SolverConfig& config) {
    FirstIterationResult first = first_iteration(desired, field, config);

    ConvergenceReport report;
    report.cached_jacobians = std::move(first.jacobians);
    report.records.push_back(std::move(first.record));

    const double initial_norm = report.records.front().max_residual_norm;
    if (initial_norm <= config.epsilon) {
        report.status = SolveStatus::converged;
    } else {
        while (true) {
            if (static_cast<int>(report.records.size()) >= config.max_iterations) {
                report.status = SolveStatus::max_iterations_reached;
                break;
            }
            report.records.push_back(iterate_step(report.records.back(), desired, field,
                                                  report.cached_jacobians, config));
            const double norm = report.records.back().max_residual_norm;
            if (norm <= config.epsilon) {
                report.status = SolveStatus::converged;
                break;
            }
            if (norm > 1e3 * initial_norm) {
                report.status = SolveStatus::diverged;
                break;
            }
        }
    }

    report.measured_rates.reserve(report.records.size() - 1);
    for (std::size_t k = 1; k < report.records.size(); ++k) {
        report.measured_rates.push_back(report.records[k].max_residual_norm /
                                        report.records[k - 1].max_residual_norm);
    }
    return report;
}

std::vector<double> per_point_rates(const ConvergenceReport& report,
                                    std::size_t point_index) {
    if (report.records.empty()) {
        throw std::invalid_argument("per_point_rates: empty report");
    }
    if (point_index >= report.records.front().residuals.size()) {
        throw std::out_of_range("per_point_rates: point index out of range");
    }
    std::vector<double> rates;
    rates.reserve(report.records.size() - 1);
    for (std::size_t k = 1; k < report.records.size(); ++k) {
        rates.push_back(report.records[k].residuals[point_index].norm() /
                        report.records[k - 1].residuals[point_index].norm());
    }
    return rates;
}

BoundaryCurve extract_initial_geometry(const ConvergenceReport& report) {
    if (report.records.empty()) {
        throw std::invalid_argument("extract_initial_geometry: empty report");
    }
    return report.records.back().m_points;
}

}  // namespace preform
