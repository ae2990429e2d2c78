#pragma once

#include "preform/geometry.hpp"
#include "preform/solver.hpp"

#include <iosfwd>
#include <string>

namespace preform {

/// A complete experiment description, as assembled from CLI flags.
struct ExperimentSpec {
    enum class FieldKind { affine, external };
    enum class ShapeKind { disc, file };
    enum class JacobianChoice { automatic, analytic, finite_difference };

    FieldKind field_kind = FieldKind::affine;
    double alpha = 0.0;
    std::string command;
    std::string workdir;
    double timeout_seconds = 60.0;

    ShapeKind shape_kind = ShapeKind::disc;
    double radius = 0.01;
    int n_points = 100;
    Point2 center{0.0, 0.0};
    std::string shape_file;

    SchemeKind scheme = SchemeKind::scheme_ii;
    /// Stopping tolerance; values <= 0 select the default, 1e-6 times the
    /// shape's characteristic length.
    double epsilon = 0.0;
    int max_iterations = 1000;
    JacobianChoice jacobian = JacobianChoice::automatic;
    /// Central-difference step; values <= 0 select default_fd_step.
    double fd_step = 0.0;
    SingularFallback fallback = SingularFallback::scheme_iii;

    std::string output_dir;
    bool keep_history = false;
};

/// Exit statuses shared by the library entry points and the CLI.
inline constexpr int kExitConverged = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxIterations = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitOracleMismatch = 4;

/// Runs the experiment and writes into spec.output_dir:
///   initial_geometry.csv   the solved pre-deformation geometry
///   deformed_geometry.csv  its deformed image at the final iteration
///   convergence.csv        columns j,max_residual_norm,rate (rate empty at j=1)
///   report.json            status, iteration count, config echo, measured
///                          rates, gradient cache
/// plus geometry_j<NNN>_{initial,deformed}.csv per iteration when
/// spec.keep_history is set.
///
/// Returns 0 converged, 2 max-iterations, 3 diverged; any error is reported
/// on `diagnostics` and yields 1. When out_report is non-null it receives the
/// full convergence report.
int run_experiment(const ExperimentSpec& spec, ConvergenceReport* out_report = nullptr,
                   std::ostream* diagnostics = nullptr);

/// run_experiment plus a ground-truth comparison, for affine fields only:
/// writes oracle_mismatch.csv (columns i,distance) with the per-node distance
/// between the solved initial geometry and the closed-form inverse.
/// Returns the run's status when it is nonzero; otherwise 0 when the largest
/// mismatch is at most 10 times the stopping tolerance and 4 when it is not.
int compare_against_oracle(const ExperimentSpec& spec, double* out_max_mismatch = nullptr,
                           std::ostream* diagnostics = nullptr);

}  // namespace preform
