#pragma once

#include "preform/fields.hpp"
#include "preform/geometry.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace preform {

/// Which corrective term the boundary-node update uses.
///   scheme_i:   none (plain residual feedback)
///   scheme_ii:  exact per-node 2x2 solve; contracts whenever both normal
///               strains have magnitude below one
///   scheme_iii: shear-only approximation of scheme_ii, valid for small
///               gradients
enum class SchemeKind { scheme_i, scheme_ii, scheme_iii };

std::string to_string(SchemeKind scheme);

/// What to do when a node's corrective system is numerically singular.
enum class SingularFallback { scheme_iii, scheme_i, fail };

struct JacobianMode {
    enum class Kind { analytic, finite_difference };
    Kind kind = Kind::analytic;
    /// Central-difference step; values <= 0 select default_fd_step of the
    /// curve being solved.
    double step = 0.0;
};

struct SolverConfig {
    SchemeKind scheme = SchemeKind::scheme_ii;
    /// Stopping tolerance on the max residual norm, in geometry length units.
    double epsilon = 1e-9;
    int max_iterations = 1000;
    JacobianMode jacobian_mode{};
    SingularFallback singular_fallback = SingularFallback::scheme_iii;
};

/// One iteration snapshot. m_points is the current estimate of the sought
/// pre-deformation geometry, n_points its deformed image, residuals the
/// desired-minus-deformed mismatch per node, correctives the extra update
/// applied this iteration (all zero for scheme_i and at j = 1).
struct IterationRecord {
    int j = 0;
    BoundaryCurve m_points;
    BoundaryCurve n_points;
    std::vector<Vector2> residuals;
    std::vector<Vector2> correctives;
    double max_residual_norm = 0.0;
    /// Nodes whose corrective system hit the singular fallback this iteration.
    int singular_fallbacks = 0;
};

enum class SolveStatus { converged, max_iterations_reached, diverged };

std::string to_string(SolveStatus status);

struct ConvergenceReport {
    std::vector<IterationRecord> records;
    SolveStatus status = SolveStatus::max_iterations_reached;
    /// Ratio of consecutive max residual norms; entry k belongs to iteration
    /// k + 2. Always records.size() - 1 entries.
    std::vector<double> measured_rates;
    /// Displacement gradients at the desired nodes, computed once in the
    /// first iteration and reused for every corrective solve. Empty when the
    /// field offers none and the scheme does not need them.
    std::vector<Jacobian2> cached_jacobians;
};

/// Per-node convergence history: ratio of node point_index's residual norms
/// between consecutive iterations. Meaningful while the norms are nonzero.
std::vector<double> per_point_rates(const ConvergenceReport& report,
                                    std::size_t point_index);

/// A node's corrective 2x2 system was numerically singular and the
/// configured fallback was `fail`.
class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(std::string message, double determinant,
                        std::ptrdiff_t point_index);

    double determinant() const noexcept { return determinant_; }
    std::ptrdiff_t point_index() const noexcept { return point_index_; }

private:
    double determinant_;
    std::ptrdiff_t point_index_;
};

/// Exact corrective term: solves the 2x2 system
///
///   [ du_x_dx + 1   du_x_dy     ] [b_x]   [ -du_x_dy * prev.dy ]
///   [ du_y_dx       du_y_dy + 1 ] [b_y] = [ -du_y_dx * prev.dx ]
///
/// which cancels the first-order cross coupling in the residual recurrence.
/// A determinant of magnitude <= 1e-12 * max(1, max-entry^2) triggers the
/// fallback; `fail` throws SingularSystemError carrying point_index.
/// used_fallback, when given, reports whether the fallback fired.
Vector2 corrective_scheme_ii(const Jacobian2& jac, Vector2 prev_residual,
                             SingularFallback fallback,
                             std::ptrdiff_t point_index = -1,
                             bool* used_fallback = nullptr);

/// Shear-only corrective term (-du_x_dy * prev.dy, -du_y_dx * prev.dx),
/// the small-gradient limit of corrective_scheme_ii.
Vector2 corrective_scheme_iii(const Jacobian2& jac, Vector2 prev_residual);

struct FirstIterationResult {
    IterationRecord record;
    /// Gradients at the desired nodes, cached for all later iterations.
    std::vector<Jacobian2> jacobians;
};

/// Seeds the iteration: the desired geometry itself is the first guess, so
/// m = desired, n = m + U(m), residual = desired - n, correctives = 0.
/// Gradients are computed here, at the desired nodes, per
/// config.jacobian_mode; failure to obtain them is fatal only for schemes
/// that need them (ii and iii).
FirstIterationResult first_iteration(const BoundaryCurve& desired,
                                     const DisplacementField& field,
                                     const SolverConfig& config);

/// Advances one iteration: per node, b from the configured scheme, then
/// m_new = m + residual + b, n_new = m_new + U(m_new),
/// residual_new = desired - n_new.
IterationRecord iterate_step(const IterationRecord& prev, const BoundaryCurve& desired,
                             const DisplacementField& field,
                             std::span<const Jacobian2> cached_jacobians,
                             const SolverConfig& config);

/// Runs first_iteration then iterate_step until the max residual norm drops
/// to config.epsilon (converged), config.max_iterations records exist
/// (max_iterations_reached), or the max residual norm exceeds 1e3 times its
/// initial value (diverged). The report keeps every iteration record.
ConvergenceReport solve(const BoundaryCurve& desired, const DisplacementField& field,
                        const SolverConfig& config);

/// The solver's answer: the pre-deformation geometry estimate of the final
/// iteration. Callers should check report.status before trusting it.
BoundaryCurve extract_initial_geometry(const ConvergenceReport& report);

}  // namespace preform
