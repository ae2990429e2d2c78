#include "preform/experiment.hpp"

#include "preform/fields.hpp"
#include "preform/oracle.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <utility>

namespace preform {

namespace fs = std::filesystem;

namespace {

struct ResolvedExperiment {
    BoundaryCurve desired;
    std::unique_ptr<DisplacementField> field;
    SolverConfig config;
};

BoundaryCurve load_shape(const ExperimentSpec& spec) {
    if (spec.shape_kind == ExperimentSpec::ShapeKind::disc) {
        return make_disc(spec.radius, spec.n_points, spec.center);
    }
    std::ifstream in(spec.shape_file);
    if (!in) {
        throw std::runtime_error("cannot open shape file '" + spec.shape_file + "'");
    }
    return read_curve(in, fs::path(spec.shape_file).stem().string());
}

ResolvedExperiment resolve(const ExperimentSpec& spec) {
    BoundaryCurve desired = load_shape(spec);

    std::unique_ptr<DisplacementField> field;
    if (spec.field_kind == ExperimentSpec::FieldKind::affine) {
        field = std::make_unique<AffineShearVolumetricField>(spec.alpha);
    } else {
        field = std::make_unique<ExternalSolverField>(spec.command, spec.workdir,
                                                      spec.timeout_seconds);
    }

    SolverConfig config;
    config.scheme = spec.scheme;
    config.epsilon = spec.epsilon > 0.0 ? spec.epsilon
                                        : 1e-6 * characteristic_length(desired);
    config.max_iterations = spec.max_iterations;
    config.singular_fallback = spec.fallback;

    const bool analytic =
        spec.jacobian == ExperimentSpec::JacobianChoice::analytic ||
        (spec.jacobian == ExperimentSpec::JacobianChoice::automatic &&
         field->jacobian_capability() == JacobianCapability::analytic);
    config.jacobian_mode.kind = analytic ? JacobianMode::Kind::analytic
                                         : JacobianMode::Kind::finite_difference;
    config.jacobian_mode.step = spec.fd_step;

    return {std::move(desired), std::move(field), config};
}

void write_curve_file(const fs::path& path, const BoundaryCurve& curve) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    write_curve(curve, out);
    if (!out.flush()) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

std::string iteration_tag(int j) {
    std::string digits = std::to_string(j);
    while (digits.size() < 3) digits.insert(digits.begin(), '0');
    return digits;
}

nlohmann::json config_echo(const ExperimentSpec& spec, const ResolvedExperiment& run) {
    nlohmann::json field;
    if (spec.field_kind == ExperimentSpec::FieldKind::affine) {
        field = {{"kind", "affine"}, {"alpha", spec.alpha}};
    } else {
        field = {{"kind", "external"},
                 {"command", spec.command},
                 {"workdir", spec.workdir},
                 {"timeout_seconds", spec.timeout_seconds}};
    }

    nlohmann::json shape;
    if (spec.shape_kind == ExperimentSpec::ShapeKind::disc) {
        shape = {{"kind", "disc"},
                 {"radius", spec.radius},
                 {"n_points", spec.n_points},
                 {"center", {spec.center.x, spec.center.y}}};
    } else {
        shape = {{"kind", "file"}, {"path", spec.shape_file}};
    }

    const bool fd = run.config.jacobian_mode.kind == JacobianMode::Kind::finite_difference;
    nlohmann::json jacobian = {{"kind", fd ? "fd" : "analytic"}};
    if (fd) {
        jacobian["step"] = run.config.jacobian_mode.step > 0.0
                               ? run.config.jacobian_mode.step
                               : default_fd_step(run.desired);
    }

    std::string fallback;
    switch (spec.fallback) {
        case SingularFallback::scheme_iii: fallback = "scheme_iii"; break;
        case SingularFallback::scheme_i: fallback = "scheme_i"; break;
        case SingularFallback::fail: fallback = "fail"; break;
    }

    return {{"field", field},
            {"shape", shape},
            {"scheme", to_string(spec.scheme)},
            {"epsilon", run.config.epsilon},
            {"max_iterations", spec.max_iterations},
            {"jacobian", jacobian},
            {"fallback", fallback},
            {"keep_history", spec.keep_history},
            {"output_dir", spec.output_dir}};
}

void write_outputs(const ExperimentSpec& spec, const ResolvedExperiment& run,
                   const ConvergenceReport& report) {
    const fs::path out_dir(spec.output_dir);
    fs::create_directories(out_dir);

    write_curve_file(out_dir / "initial_geometry.csv", extract_initial_geometry(report));
    write_curve_file(out_dir / "deformed_geometry.csv", report.records.back().n_points);

    if (spec.keep_history) {
        for (const IterationRecord& record : report.records) {
            const std::string tag = iteration_tag(record.j);
            write_curve_file(out_dir / ("geometry_j" + tag + "_initial.csv"),
                             record.m_points);
            write_curve_file(out_dir / ("geometry_j" + tag + "_deformed.csv"),
                             record.n_points);
        }
    }

    {
        std::ofstream out(out_dir / "convergence.csv");
        if (!out) {
            throw std::runtime_error("cannot write convergence.csv");
        }
        out << "j,max_residual_norm,rate\n";
        for (std::size_t k = 0; k < report.records.size(); ++k) {
            out << report.records[k].j << ','
                << format_double(report.records[k].max_residual_norm) << ',';
            if (k > 0) {
                out << format_double(report.measured_rates[k - 1]);
            }
            out << '\n';
        }
    }

    int singular_fallbacks = 0;
    for (const IterationRecord& record : report.records) {
        singular_fallbacks += record.singular_fallbacks;
    }

    nlohmann::json doc;
    doc["status"] = to_string(report.status);
    doc["iterations"] = report.records.size();
    doc["config"] = config_echo(spec, run);
    doc["measured_rates"] = report.measured_rates;
    nlohmann::json norms = nlohmann::json::array();
    for (const IterationRecord& record : report.records) {
        norms.push_back(record.max_residual_norm);
    }
    doc["max_residual_norms"] = std::move(norms);
    nlohmann::json cache = nlohmann::json::array();
    for (const Jacobian2& jac : report.cached_jacobians) {
        cache.push_back({jac.du_x_dx, jac.du_x_dy, jac.du_y_dx, jac.du_y_dy});
    }
    doc["jacobian_cache"] = std::move(cache);
    doc["singular_fallbacks"] = singular_fallbacks;

    std::ofstream json_out(out_dir / "report.json");
    if (!json_out) {
        throw std::runtime_error("cannot write report.json");
    }
    json_out << doc.dump(2) << '\n';
}

int status_code(SolveStatus status) {
    switch (status) {
        case SolveStatus::converged: return kExitConverged;
        case SolveStatus::max_iterations_reached: return kExitMaxIterations;
        case SolveStatus::diverged: return kExitDiverged;
    }
    return kExitError;
}

int run_impl(const ExperimentSpec& spec, ConvergenceReport* out_report,
             ResolvedExperiment* out_resolved, std::ostream& diag) {
    try {
        ResolvedExperiment run = resolve(spec);
        ConvergenceReport report = solve(run.desired, *run.field, run.config);

        int singular_fallbacks = 0;
        for (const IterationRecord& record : report.records) {
            singular_fallbacks += record.singular_fallbacks;
        }
        if (singular_fallbacks > 0) {
            diag << "warning: corrective system singular " << singular_fallbacks
                 << " time(s); fallback applied\n";
        }

        write_outputs(spec, run, report);
        const int code = status_code(report.status);
        if (out_report) *out_report = std::move(report);
        if (out_resolved) *out_resolved = std::move(run);
        return code;
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace

int run_experiment(const ExperimentSpec& spec, ConvergenceReport* out_report,
                   std::ostream* diagnostics) {
    std::ostream& diag = diagnostics ? *diagnostics : std::cerr;
    return run_impl(spec, out_report, nullptr, diag);
}

int compare_against_oracle(const ExperimentSpec& spec, double* out_max_mismatch,
                           std::ostream* diagnostics) {
    std::ostream& diag = diagnostics ? *diagnostics : std::cerr;
    if (spec.field_kind != ExperimentSpec::FieldKind::affine) {
        diag << "error: the ground-truth comparison needs an affine field\n";
        return kExitError;
    }

    ConvergenceReport report;
    ResolvedExperiment run{BoundaryCurve({Point2{}}), nullptr, SolverConfig{}};
    const int run_code = run_impl(spec, &report, &run, diag);
    if (run_code == kExitError) {
        return kExitError;
    }

    try {
        const BoundaryCurve truth = analytic_inverse({spec.alpha, run.desired});
        const BoundaryCurve solved = extract_initial_geometry(report);

        double max_mismatch = 0.0;
        std::ofstream out(fs::path(spec.output_dir) / "oracle_mismatch.csv");
        if (!out) {
            throw std::runtime_error("cannot write oracle_mismatch.csv");
        }
        out << "i,distance\n";
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const double distance = (solved[i] - truth[i]).norm();
            max_mismatch = std::max(max_mismatch, distance);
            out << i << ',' << format_double(distance) << '\n';
        }
        if (out_max_mismatch) *out_max_mismatch = max_mismatch;

        if (run_code != kExitConverged) {
            return run_code;
        }
        return max_mismatch <= 10.0 * run.config.epsilon ? kExitConverged
                                                         : kExitOracleMismatch;
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace preform
