#include "preform/experiment.hpp"
#include "preform/solver.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

preform::SchemeKind parse_scheme(const std::string& name) {
    if (name == "I") return preform::SchemeKind::scheme_i;
    if (name == "II") return preform::SchemeKind::scheme_ii;
    return preform::SchemeKind::scheme_iii;
}

preform::SingularFallback parse_fallback(const std::string& name) {
    if (name == "scheme_i") return preform::SingularFallback::scheme_i;
    if (name == "fail") return preform::SingularFallback::fail;
    return preform::SingularFallback::scheme_iii;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Finds the pre-deformation boundary geometry whose deformed image matches a "
        "prescribed target shape, by iterative boundary-node updates."};

    std::string field_kind = "affine";
    double alpha = 0.0;
    std::string command;
    std::string workdir;
    double timeout_seconds = 60.0;

    std::string shape_kind = "disc";
    double radius = 0.01;
    int n_points = 100;
    double center_x = 0.0;
    double center_y = 0.0;
    std::string shape_file;

    std::string scheme = "II";
    double epsilon = 0.0;
    int max_iterations = 1000;
    std::string jacobian = "auto";
    double fd_step = 0.0;
    std::string fallback = "scheme_iii";

    std::string output_dir;
    bool keep_history = false;
    bool compare_oracle = false;

    app.add_option("--field", field_kind, "Displacement field backend")
        ->check(CLI::IsMember({"affine", "external"}))
        ->capture_default_str();
    app.add_option("--alpha", alpha, "Strain magnitude of the affine field");
    app.add_option("--command", command,
                   "External solver invocation; {workdir} is replaced by the work "
                   "directory (appended if absent)");
    app.add_option("--workdir", workdir, "Work directory for the file exchange");
    app.add_option("--timeout", timeout_seconds, "External solver timeout in seconds")
        ->capture_default_str();

    app.add_option("--shape", shape_kind, "Target shape source")
        ->check(CLI::IsMember({"disc", "file"}))
        ->capture_default_str();
    app.add_option("--radius", radius, "Disc radius")->capture_default_str();
    app.add_option("--n", n_points, "Disc point count")->capture_default_str();
    app.add_option("--center-x", center_x, "Disc center x")->capture_default_str();
    app.add_option("--center-y", center_y, "Disc center y")->capture_default_str();
    app.add_option("--file", shape_file, "CSV file with the target shape (header x,y)");

    app.add_option("--scheme", scheme, "Corrective-term scheme")
        ->check(CLI::IsMember({"I", "II", "III"}))
        ->capture_default_str();
    app.add_option("--epsilon", epsilon,
                   "Stopping tolerance on the max residual norm "
                   "(default: 1e-6 x shape characteristic length)");
    app.add_option("--max-iter", max_iterations, "Iteration cap")->capture_default_str();
    app.add_option("--jacobian", jacobian, "Displacement-gradient source")
        ->check(CLI::IsMember({"auto", "analytic", "fd"}))
        ->capture_default_str();
    app.add_option("--fd-step", fd_step,
                   "Central-difference step (default: 1e-6 x bounding-box diagonal)");
    app.add_option("--fallback", fallback, "Behavior on a singular corrective system")
        ->check(CLI::IsMember({"scheme_iii", "scheme_i", "fail"}))
        ->capture_default_str();

    app.add_option("--out", output_dir, "Output directory")->required();
    app.add_flag("--keep-history", keep_history, "Write per-iteration geometry files");
    app.add_flag("--compare-oracle", compare_oracle,
                 "Also compare against the closed-form inverse (affine fields only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return preform::kExitError;
    }

    preform::ExperimentSpec spec;
    spec.field_kind = field_kind == "affine" ? preform::ExperimentSpec::FieldKind::affine
                                             : preform::ExperimentSpec::FieldKind::external;
    spec.alpha = alpha;
    spec.command = command;
    spec.workdir = workdir;
    spec.timeout_seconds = timeout_seconds;
    spec.shape_kind = shape_kind == "disc" ? preform::ExperimentSpec::ShapeKind::disc
                                           : preform::ExperimentSpec::ShapeKind::file;
    spec.radius = radius;
    spec.n_points = n_points;
    spec.center = {center_x, center_y};
    spec.shape_file = shape_file;
    spec.scheme = parse_scheme(scheme);
    spec.epsilon = epsilon;
    spec.max_iterations = max_iterations;
    spec.jacobian = jacobian == "analytic"
                        ? preform::ExperimentSpec::JacobianChoice::analytic
                        : (jacobian == "fd"
                               ? preform::ExperimentSpec::JacobianChoice::finite_difference
                               : preform::ExperimentSpec::JacobianChoice::automatic);
    spec.fd_step = fd_step;
    spec.fallback = parse_fallback(fallback);
    spec.output_dir = output_dir;
    spec.keep_history = keep_history;

    if (spec.field_kind == preform::ExperimentSpec::FieldKind::affine &&
        app.count("--alpha") == 0) {
        std::cerr << "error: --field affine needs --alpha\n";
        return preform::kExitError;
    }
    if (spec.field_kind == preform::ExperimentSpec::FieldKind::external &&
        (command.empty() || workdir.empty())) {
        std::cerr << "error: --field external needs --command and --workdir\n";
        return preform::kExitError;
    }
    if (spec.shape_kind == preform::ExperimentSpec::ShapeKind::file && shape_file.empty()) {
        std::cerr << "error: --shape file needs --file\n";
        return preform::kExitError;
    }

    if (compare_oracle) {
        return preform::compare_against_oracle(spec);
    }
    return preform::run_experiment(spec);
}
