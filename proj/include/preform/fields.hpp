#pragma once

#include "preform/geometry.hpp"

#include <iosfwd>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace preform {

/// 2x2 displacement gradient at a point: normal strains on the diagonal,
/// shear terms off it.
struct Jacobian2 {
    double du_x_dx = 0.0;  // epsilon_xx
    double du_x_dy = 0.0;
    double du_y_dx = 0.0;
    double du_y_dy = 0.0;  // epsilon_yy

    friend bool operator==(const Jacobian2&, const Jacobian2&) = default;
};

[[nodiscard]] bool is_finite(const Jacobian2& j);

enum class JacobianCapability { analytic, none };

/// A displacement field U(x, y): the forward problem's answer at a point.
///
/// Implementations must be pure functions of the input point (same point,
/// same displacement, no state across calls), which also makes concurrent
/// evaluation safe.
class DisplacementField {
public:
    virtual ~DisplacementField() = default;

    virtual Vector2 evaluate(Point2 p) const = 0;

    virtual JacobianCapability jacobian_capability() const {
        return JacobianCapability::none;
    }

    /// Analytic displacement gradient at p. Only valid when
    /// jacobian_capability() is analytic; the default throws.
    virtual Jacobian2 jacobian(Point2 p) const;

    /// Evaluates the field at every point, in input order. One batch is the
    /// unit of work that externally backed fields turn into a single
    /// invocation; the default simply loops evaluate().
    virtual std::vector<Vector2> evaluate_batch(std::span<const Point2> points) const;
};

/// U = (alpha*(x + y), alpha*(x - y)): a position-independent gradient with
/// volumetric and shear strain of equal magnitude alpha.
class AffineShearVolumetricField final : public DisplacementField {
public:
    explicit AffineShearVolumetricField(double alpha);

    double alpha() const noexcept { return alpha_; }

    Vector2 evaluate(Point2 p) const override;
    JacobianCapability jacobian_capability() const override {
        return JacobianCapability::analytic;
    }
    Jacobian2 jacobian(Point2 p) const override;

private:
    double alpha_;
};

/// Central-difference displacement gradient with step h in each axis.
Jacobian2 fd_jacobian(const DisplacementField& field, Point2 p, double h);

/// fd_jacobian for a whole point set, arranged as four shifted batch
/// evaluations so externally backed fields pay four invocations total.
/// Entry i is arithmetically identical to fd_jacobian(field, points[i], h).
std::vector<Jacobian2> fd_jacobians(const DisplacementField& field,
                                    std::span<const Point2> points, double h);

/// Default central-difference step: 1e-6 times the curve's bounding-box
/// diagonal. Throws for degenerate curves (zero diagonal); pass an explicit
/// step instead.
double default_fd_step(const BoundaryCurve& curve);

/// Failure while driving an external solver process; the message carries the
/// command's captured diagnostics.
class AdapterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Displacement field backed by an external program, coupled through files:
/// each batch writes `points_in.csv` (header `x,y`) into the work directory,
/// runs the command, and reads `displacements_out.csv` (header `ux,uy`, one
/// row per input point, same order) back.
///
/// Every `{workdir}` in the command template is replaced with the
/// shell-quoted work directory; if the template has no placeholder the path
/// is appended as a final argument. Exit status 0 means success.
///
/// Batches are serialized internally (one child process at a time per
/// instance), so a shared instance is safe to call from several threads.
class ExternalSolverField final : public DisplacementField {
public:
    ExternalSolverField(std::string command, std::string workdir,
                        double timeout_seconds = 60.0);

    const std::string& command() const noexcept { return command_; }
    const std::string& workdir() const noexcept { return workdir_; }
    double timeout_seconds() const noexcept { return timeout_seconds_; }

    Vector2 evaluate(Point2 p) const override;
    std::vector<Vector2> evaluate_batch(std::span<const Point2> points) const override;

private:
    std::string command_;
    std::string workdir_;
    double timeout_seconds_;
    mutable std::mutex run_mutex_;
};

/// Displacement CSV (header `ux,uy`), the adapter's output wire format.
std::vector<Vector2> read_displacements(std::istream& in);
void write_displacements(std::span<const Vector2> displacements, std::ostream& out);

}  // namespace preform
