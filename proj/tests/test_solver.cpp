#include "preform/solver.hpp"

#include "preform/oracle.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace preform;
using test_support::bit_equal;
using test_support::max_abs_coordinate;
using test_support::ulp_at;
using test_support::uniform;

namespace {

/// U = a*(x^2 + x*y, y^2 - x*y): smooth nonlinearity with an analytic
/// gradient, small strains on centimeter-scale geometry.
struct PolyField final : DisplacementField {
    double a = 1.0;

    Vector2 evaluate(Point2 p) const override {
        return {a * (p.x * p.x + p.x * p.y), a * (p.y * p.y - p.x * p.y)};
    }
    JacobianCapability jacobian_capability() const override {
        return JacobianCapability::analytic;
    }
    Jacobian2 jacobian(Point2 p) const override {
        return {a * (2.0 * p.x + p.y), a * p.x, -a * p.y, a * (2.0 * p.y - p.x)};
    }
};

/// Diagonal gradient, no shear; every scheme's corrective vanishes here.
struct DiagField final : DisplacementField {
    double exx;
    double eyy;

    DiagField(double exx_in, double eyy_in) : exx(exx_in), eyy(eyy_in) {}

    Vector2 evaluate(Point2 p) const override { return {exx * p.x, eyy * p.y}; }
    JacobianCapability jacobian_capability() const override {
        return JacobianCapability::analytic;
    }
    Jacobian2 jacobian(Point2) const override { return {exx, 0.0, 0.0, eyy}; }
};

/// Evaluable everywhere but refuses to reveal its gradient.
struct HiddenJacobianField final : DisplacementField {
    AffineShearVolumetricField inner{0.6};

    Vector2 evaluate(Point2 p) const override { return inner.evaluate(p); }
};

SolverConfig config_for(SchemeKind scheme, double epsilon, int max_iterations = 1000) {
    SolverConfig config;
    config.scheme = scheme;
    config.epsilon = epsilon;
    config.max_iterations = max_iterations;
    return config;
}

BoundaryCurve random_curve(std::mt19937_64& rng, std::size_t count, double scale) {
    std::vector<Point2> pts;
    pts.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        pts.push_back({uniform(rng, -scale, scale), uniform(rng, -scale, scale)});
    }
    return BoundaryCurve(std::move(pts), "random");
}

double report_coordinate_scale(const ConvergenceReport& report) {
    double scale = 0.0;
    for (const IterationRecord& record : report.records) {
        scale = std::max(scale, max_abs_coordinate(record.m_points));
        scale = std::max(scale, max_abs_coordinate(record.n_points));
    }
    return scale;
}

/// The update rule forces residual_new = U(m_prev) - U(m_new) - b for any
/// field whatsoever; checks every consecutive record pair against a fresh
/// field evaluation.
void check_update_identity(const ConvergenceReport& report, const DisplacementField& field,
                           double tol) {
    for (std::size_t k = 1; k < report.records.size(); ++k) {
        const IterationRecord& prev = report.records[k - 1];
        const IterationRecord& cur = report.records[k];
        for (std::size_t i = 0; i < cur.residuals.size(); ++i) {
            const Vector2 u_prev = field.evaluate(prev.m_points[i]);
            const Vector2 u_cur = field.evaluate(cur.m_points[i]);
            const Vector2 expected = u_prev - u_cur - cur.correctives[i];
            CHECK(std::abs(cur.residuals[i].dx - expected.dx) <= tol);
            CHECK(std::abs(cur.residuals[i].dy - expected.dy) <= tol);
        }
    }
}

}  // namespace

TEST_CASE("first_iteration seeds from the desired geometry") {
    const AffineShearVolumetricField field(0.6);
    const BoundaryCurve desired({Point2{0.01, 0.0}});
    const auto [record, jacobians] =
        first_iteration(desired, field, config_for(SchemeKind::scheme_ii, 1e-9));

    CHECK(record.j == 1);
    CHECK(bit_equal(record.m_points[0], desired[0]));
    CHECK(std::abs(record.residuals[0].dx + 0.006) <= 1e-17);
    CHECK(std::abs(record.residuals[0].dy + 0.006) <= 1e-17);
    CHECK(record.correctives[0] == Vector2{0.0, 0.0});
    CHECK(record.max_residual_norm == record.residuals[0].norm());
    CHECK(bit_equal(record.n_points[0], desired[0] + field.evaluate(desired[0])));

    REQUIRE(jacobians.size() == 1);
    CHECK(jacobians[0] == Jacobian2{0.6, 0.6, 0.6, -0.6});
}

TEST_CASE("first_iteration under an identity deformation is already converged") {
    const AffineShearVolumetricField field(0.0);
    const BoundaryCurve desired = make_disc(0.01, 10, {});
    const auto [record, jacobians] =
        first_iteration(desired, field, config_for(SchemeKind::scheme_i, 1e-9));
    for (const Vector2& r : record.residuals) {
        CHECK(r == Vector2{0.0, 0.0});
    }
    CHECK(record.max_residual_norm == 0.0);
}

TEST_CASE("first_iteration residual at a y-axis node") {
    const AffineShearVolumetricField field(0.9);
    const BoundaryCurve desired({Point2{0.0, 0.01}});
    const auto [record, jacobians] =
        first_iteration(desired, field, config_for(SchemeKind::scheme_i, 1e-9));
    CHECK(std::abs(record.residuals[0].dx + 0.009) <= 1e-17);
    CHECK(std::abs(record.residuals[0].dy - 0.009) <= 1e-17);
}

TEST_CASE("first_iteration computes gradients per the configured mode") {
    const AffineShearVolumetricField field(0.6);
    const BoundaryCurve desired = make_disc(0.01, 25, {});

    SolverConfig fd = config_for(SchemeKind::scheme_ii, 1e-9);
    fd.jacobian_mode.kind = JacobianMode::Kind::finite_difference;
    const auto [record, jacobians] = first_iteration(desired, field, fd);
    REQUIRE(jacobians.size() == desired.size());
    for (const Jacobian2& jac : jacobians) {
        CHECK(std::abs(jac.du_x_dx - 0.6) <= 1e-9);
        CHECK(std::abs(jac.du_x_dy - 0.6) <= 1e-9);
        CHECK(std::abs(jac.du_y_dx - 0.6) <= 1e-9);
        CHECK(std::abs(jac.du_y_dy + 0.6) <= 1e-9);
    }
}

TEST_CASE("gradient failures are fatal only for schemes that need them") {
    const HiddenJacobianField field;
    const BoundaryCurve desired = make_disc(0.01, 5, {});

    const auto tolerant = first_iteration(desired, field, config_for(SchemeKind::scheme_i, 1e-9));
    CHECK(tolerant.jacobians.empty());
    CHECK(tolerant.record.j == 1);

    CHECK_THROWS_AS(first_iteration(desired, field, config_for(SchemeKind::scheme_ii, 1e-9)),
                    std::runtime_error);
    CHECK_THROWS_AS(first_iteration(desired, field, config_for(SchemeKind::scheme_iii, 1e-9)),
                    std::runtime_error);

    // A degenerate curve breaks the default fd step; scheme_i shrugs it off.
    const BoundaryCurve single({Point2{0.01, 0.0}});
    SolverConfig fd = config_for(SchemeKind::scheme_i, 1e-9);
    fd.jacobian_mode.kind = JacobianMode::Kind::finite_difference;
    const auto tolerated = first_iteration(single, AffineShearVolumetricField(0.6), fd);
    CHECK(tolerated.jacobians.empty());
}

TEST_CASE("exact corrective term solves its 2x2 system") {
    const Jacobian2 jac{0.6, 0.6, 0.6, -0.6};
    const Vector2 prev{1.0, 0.0};
    const Vector2 b = corrective_scheme_ii(jac, prev, SingularFallback::fail);

    // substitute back: both system rows must balance
    const double row_x =
        (jac.du_x_dx + 1.0) * b.dx + jac.du_x_dy * b.dy - (-jac.du_x_dy * prev.dy);
    const double row_y =
        jac.du_y_dx * b.dx + (jac.du_y_dy + 1.0) * b.dy - (-jac.du_y_dx * prev.dx);
    CHECK(std::abs(row_x) <= 1e-15);
    CHECK(std::abs(row_y) <= 1e-15);

    CHECK(std::abs(b.dx - 9.0 / 7.0) <= 1e-15 * (9.0 / 7.0));
    CHECK(std::abs(b.dy + 24.0 / 7.0) <= 1e-15 * (24.0 / 7.0));
}

TEST_CASE("exact corrective term vanishes without shear or residual") {
    const Jacobian2 jac{0.3, -0.8, 0.5, 0.1};
    CHECK(corrective_scheme_ii(jac, {0.0, 0.0}, SingularFallback::fail) == Vector2{0.0, 0.0});

    const Jacobian2 no_shear{0.4, 0.0, 0.0, -0.2};
    CHECK(corrective_scheme_ii(no_shear, {3.0, -2.0}, SingularFallback::fail) ==
          Vector2{0.0, 0.0});
}

TEST_CASE("singular corrective systems honor the configured fallback") {
    const double critical = 1.0 / std::sqrt(2.0);
    const Jacobian2 jac{critical, critical, critical, -critical};
    const Vector2 prev{0.5, -0.25};

    bool used = false;
    const Vector2 iii =
        corrective_scheme_ii(jac, prev, SingularFallback::scheme_iii, 7, &used);
    CHECK(used);
    CHECK(iii == corrective_scheme_iii(jac, prev));

    used = false;
    CHECK(corrective_scheme_ii(jac, prev, SingularFallback::scheme_i, 7, &used) ==
          Vector2{0.0, 0.0});
    CHECK(used);

    try {
        corrective_scheme_ii(jac, prev, SingularFallback::fail, 7);
        FAIL("expected SingularSystemError");
    } catch (const SingularSystemError& e) {
        CHECK(e.point_index() == 7);
        CHECK(std::abs(e.determinant()) <= 1e-15);
        CHECK(std::string(e.what()).find("node 7") != std::string::npos);
    }
}

TEST_CASE("shear-only corrective term") {
    CHECK(corrective_scheme_iii({0.6, 0.6, 0.6, -0.6}, {1.0, 0.0}) == Vector2{0.0, -0.6});
    CHECK(corrective_scheme_iii({0.1, 0.1, 0.1, -0.1}, {1.0, 1.0}) == Vector2{-0.1, -0.1});
    CHECK(corrective_scheme_iii({0.9, 0.9, 0.9, -0.9}, {0.0, 0.0}) == Vector2{0.0, 0.0});
}

TEST_CASE("iterate_step reproduces the hand-computed trajectory") {
    const AffineShearVolumetricField field(0.6);
    const BoundaryCurve desired({Point2{0.01, 0.0}});
    const SolverConfig config = config_for(SchemeKind::scheme_i, 1e-12);
    const auto first = first_iteration(desired, field, config);
    const IterationRecord second =
        iterate_step(first.record, desired, field, first.jacobians, config);

    CHECK(second.j == 2);
    CHECK(std::abs(second.m_points[0].x - 0.004) <= 1e-17);
    CHECK(std::abs(second.m_points[0].y + 0.006) <= 1e-17);
    CHECK(std::abs(second.n_points[0].x - 0.0028) <= 1e-16);
    CHECK(std::abs(second.n_points[0].y) <= 1e-17);
    CHECK(std::abs(second.residuals[0].dx - 0.0072) <= 1e-16);
    CHECK(std::abs(second.residuals[0].dy) <= 1e-17);

    // independent route: advance the first residual through the frozen 2x2
    // recurrence instead of moving points
    const Vector2 predicted = recurrence_step(field.jacobian(desired[0]),
                                              SchemeKind::scheme_i, first.record.residuals[0]);
    CHECK(std::abs(second.residuals[0].dx - predicted.dx) <= 8.0 * ulp_at(0.016));
    CHECK(std::abs(second.residuals[0].dy - predicted.dy) <= 8.0 * ulp_at(0.016));
}

TEST_CASE("scheme_ii decouples the residual components on a uniform gradient") {
    const AffineShearVolumetricField field(0.6);
    const BoundaryCurve desired = make_disc(0.01, 16, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_ii, 1e-13));
    REQUIRE(report.status == SolveStatus::converged);

    const double tol = 8.0 * ulp_at(report_coordinate_scale(report));
    for (std::size_t k = 1; k < report.records.size(); ++k) {
        const auto& prev = report.records[k - 1].residuals;
        const auto& cur = report.records[k].residuals;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            CHECK(std::abs(cur[i].dx - (-0.6) * prev[i].dx) <= tol);
            CHECK(std::abs(cur[i].dy - 0.6 * prev[i].dy) <= tol);
        }
    }
}

TEST_CASE("scheme_i follows the pure gradient map on a uniform gradient") {
    const AffineShearVolumetricField field(0.45);
    const Jacobian2 jac = field.jacobian({});
    const BoundaryCurve desired = make_disc(0.01, 16, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_i, 1e-13));
    REQUIRE(report.status == SolveStatus::converged);

    const double tol = 8.0 * ulp_at(report_coordinate_scale(report));
    for (std::size_t k = 1; k < report.records.size(); ++k) {
        const auto& prev = report.records[k - 1].residuals;
        const auto& cur = report.records[k].residuals;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const Vector2 mapped = recurrence_step(jac, SchemeKind::scheme_i, prev[i]);
            CHECK(std::abs(cur[i].dx - mapped.dx) <= tol);
            CHECK(std::abs(cur[i].dy - mapped.dy) <= tol);
        }
    }
}

TEST_CASE("a zero residual is a fixed point for every scheme") {
    const AffineShearVolumetricField field(0.0);
    std::mt19937_64 rng(5);
    const BoundaryCurve desired = random_curve(rng, 6, 0.02);
    for (const SchemeKind scheme :
         {SchemeKind::scheme_i, SchemeKind::scheme_ii, SchemeKind::scheme_iii}) {
        const SolverConfig config = config_for(scheme, 1e-9);
        const auto first = first_iteration(desired, field, config);
        const IterationRecord next =
            iterate_step(first.record, desired, field, first.jacobians, config);
        for (std::size_t i = 0; i < desired.size(); ++i) {
            CHECK(bit_equal(next.m_points[i], first.record.m_points[i]));
            CHECK(next.residuals[i] == Vector2{0.0, 0.0});
        }
    }
}

TEST_CASE("solve converges at the uniform-gradient rate") {
    const AffineShearVolumetricField field(0.6);
    const BoundaryCurve desired = make_disc(0.01, 100, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_ii, 1e-9));
    CHECK(report.status == SolveStatus::converged);
    CHECK(report.records.back().max_residual_norm <= 1e-9);
    // rates equal the strain magnitude up to coordinate-scale rounding,
    // which is amplified as the residuals approach the stopping tolerance
    for (const double rate : report.measured_rates) {
        CHECK(std::abs(rate - 0.6) <= 1e-7 * 0.6);
    }
}

TEST_CASE("solve flags divergence for the uncorrected scheme at strong strain") {
    const AffineShearVolumetricField field(0.9);
    const BoundaryCurve desired = make_disc(0.01, 100, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_i, 1e-11));
    CHECK(report.status == SolveStatus::diverged);
    CHECK(report.records.back().max_residual_norm >
          1e3 * report.records.front().max_residual_norm);
}

TEST_CASE("solve under an identity deformation stops immediately") {
    const AffineShearVolumetricField field(0.0);
    const BoundaryCurve desired = make_disc(0.01, 40, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_ii, 1e-9));
    CHECK(report.status == SolveStatus::converged);
    CHECK(report.records.size() == 1);
    CHECK(report.measured_rates.empty());
}

TEST_CASE("solve stops at the iteration cap") {
    const AffineShearVolumetricField field(0.6);
    const BoundaryCurve desired = make_disc(0.01, 10, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_i, 1e-12, 3));
    CHECK(report.status == SolveStatus::max_iterations_reached);
    CHECK(report.records.size() == 3);
    CHECK(report.measured_rates.size() == 2);
    CHECK(report.records.back().max_residual_norm > 1e-12);
}

TEST_CASE("solve records are internally consistent") {
    const AffineShearVolumetricField field(0.35);
    const BoundaryCurve desired = make_disc(0.01, 20, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_iii, 1e-11));
    REQUIRE(report.status == SolveStatus::converged);
    CHECK(report.measured_rates.size() == report.records.size() - 1);
    CHECK(report.cached_jacobians.size() == desired.size());

    for (std::size_t k = 0; k < report.records.size(); ++k) {
        const IterationRecord& record = report.records[k];
        CHECK(record.j == static_cast<int>(k) + 1);
        double max_norm = 0.0;
        for (std::size_t i = 0; i < desired.size(); ++i) {
            CHECK(bit_equal(record.n_points[i],
                            record.m_points[i] + field.evaluate(record.m_points[i])));
            CHECK(bit_equal(record.residuals[i], desired[i] - record.n_points[i]));
            max_norm = std::max(max_norm, record.residuals[i].norm());
        }
        CHECK(record.max_residual_norm == max_norm);
    }
}

TEST_CASE("residual update identity holds for any field and scheme") {
    const BoundaryCurve desired = make_disc(0.01, 30, {});
    const double tol = 1e-14 * max_abs_coordinate(desired);

    const AffineShearVolumetricField affine(0.6);
    const PolyField poly;
    for (const SchemeKind scheme :
         {SchemeKind::scheme_i, SchemeKind::scheme_ii, SchemeKind::scheme_iii}) {
        check_update_identity(solve(desired, affine, config_for(scheme, 1e-11, 40)), affine,
                              tol);
        check_update_identity(solve(desired, poly, config_for(scheme, 1e-13)), poly, tol);
    }
}

TEST_CASE("all schemes invert a smooth nonlinear deformation") {
    const PolyField field;
    const BoundaryCurve desired = make_disc(0.01, 50, {});
    for (const SchemeKind scheme :
         {SchemeKind::scheme_i, SchemeKind::scheme_ii, SchemeKind::scheme_iii}) {
        const ConvergenceReport report = solve(desired, field, config_for(scheme, 1e-13));
        REQUIRE(report.status == SolveStatus::converged);
        const BoundaryCurve initial = extract_initial_geometry(report);
        for (std::size_t i = 0; i < desired.size(); ++i) {
            const Point2 pushed = initial[i] + field.evaluate(initial[i]);
            CHECK((pushed - desired[i]).norm() <= 2e-13);
        }
    }
}

TEST_CASE("max residual norm contracts by the strain factor") {
    const AffineShearVolumetricField field(0.85);
    const BoundaryCurve desired = make_disc(0.01, 60, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_ii, 1e-11));
    REQUIRE(report.status == SolveStatus::converged);
    for (std::size_t k = 1; k < report.records.size(); ++k) {
        const double prev = report.records[k - 1].max_residual_norm;
        const double cur = report.records[k].max_residual_norm;
        CHECK(cur < prev);
        CHECK(cur <= 0.85 * prev * (1.0 + 1e-5));
    }
}

TEST_CASE("schemes coincide when the gradient has no shear") {
    const DiagField field{0.3, -0.2};
    std::mt19937_64 rng(17);
    const BoundaryCurve desired = random_curve(rng, 8, 0.05);
    const ConvergenceReport a = solve(desired, field, config_for(SchemeKind::scheme_i, 1e-13));
    const ConvergenceReport b = solve(desired, field, config_for(SchemeKind::scheme_ii, 1e-13));
    const ConvergenceReport c =
        solve(desired, field, config_for(SchemeKind::scheme_iii, 1e-13));

    REQUIRE(a.records.size() == b.records.size());
    REQUIRE(a.records.size() == c.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        for (std::size_t i = 0; i < desired.size(); ++i) {
            CHECK(bit_equal(a.records[k].m_points[i], b.records[k].m_points[i]));
            CHECK(bit_equal(a.records[k].m_points[i], c.records[k].m_points[i]));
            CHECK(bit_equal(a.records[k].residuals[i], b.records[k].residuals[i]));
            CHECK(bit_equal(a.records[k].residuals[i], c.records[k].residuals[i]));
            CHECK(b.records[k].correctives[i] == Vector2{0.0, 0.0});
            CHECK(c.records[k].correctives[i] == Vector2{0.0, 0.0});
        }
    }
}

TEST_CASE("identical inputs give bit-identical reports") {
    const AffineShearVolumetricField field(0.55);
    const BoundaryCurve desired = make_disc(0.013, 33, {0.002, -0.001});
    const SolverConfig config = config_for(SchemeKind::scheme_ii, 1e-12);
    const ConvergenceReport a = solve(desired, field, config);
    const ConvergenceReport b = solve(desired, field, config);

    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.status == b.status);
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        CHECK(bit_equal(a.records[k].max_residual_norm, b.records[k].max_residual_norm));
        for (std::size_t i = 0; i < desired.size(); ++i) {
            CHECK(bit_equal(a.records[k].m_points[i], b.records[k].m_points[i]));
            CHECK(bit_equal(a.records[k].n_points[i], b.records[k].n_points[i]));
            CHECK(bit_equal(a.records[k].residuals[i], b.records[k].residuals[i]));
            CHECK(bit_equal(a.records[k].correctives[i], b.records[k].correctives[i]));
        }
    }
    for (std::size_t k = 0; k < a.measured_rates.size(); ++k) {
        CHECK(bit_equal(a.measured_rates[k], b.measured_rates[k]));
    }
}

TEST_CASE("nodes never couple: solo solves match the full solve") {
    const AffineShearVolumetricField field(0.5);
    const BoundaryCurve desired = make_disc(0.01, 12, {});
    const SolverConfig config = config_for(SchemeKind::scheme_ii, 1e-300, 10);

    const ConvergenceReport full = solve(desired, field, config);
    REQUIRE(full.records.size() == 10);
    for (std::size_t i = 0; i < desired.size(); ++i) {
        const BoundaryCurve solo_curve({desired[i]});
        const ConvergenceReport solo = solve(solo_curve, field, config);
        REQUIRE(solo.records.size() == 10);
        for (std::size_t k = 0; k < 10; ++k) {
            CHECK(bit_equal(full.records[k].m_points[i], solo.records[k].m_points[0]));
            CHECK(bit_equal(full.records[k].n_points[i], solo.records[k].n_points[0]));
            CHECK(bit_equal(full.records[k].residuals[i], solo.records[k].residuals[0]));
            CHECK(bit_equal(full.records[k].correctives[i], solo.records[k].correctives[0]));
        }
    }
}

TEST_CASE("per-node rates of the uncorrected scheme are the gradient's gain") {
    const AffineShearVolumetricField field(0.3);
    const BoundaryCurve desired = make_disc(0.01, 24, {});
    const ConvergenceReport report =
        solve(desired, field, config_for(SchemeKind::scheme_i, 1e-7));
    REQUIRE(report.status == SolveStatus::converged);
    const double gain = 0.3 * std::sqrt(2.0);
    for (std::size_t i = 0; i < desired.size(); ++i) {
        for (const double rate : per_point_rates(report, i)) {
            CHECK(std::abs(rate - gain) <= 1e-9 * gain);
        }
    }
}

TEST_CASE("extract_initial_geometry returns the final estimate") {
    const AffineShearVolumetricField zero(0.0);
    const BoundaryCurve desired = make_disc(0.01, 8, {});
    const ConvergenceReport trivial =
        solve(desired, zero, config_for(SchemeKind::scheme_i, 1e-9));
    const BoundaryCurve same = extract_initial_geometry(trivial);
    for (std::size_t i = 0; i < desired.size(); ++i) {
        CHECK(bit_equal(same[i], desired[i]));
    }

    const AffineShearVolumetricField field(0.6);
    const BoundaryCurve point({Point2{0.01, 0.0}});
    const ConvergenceReport report =
        solve(point, field, config_for(SchemeKind::scheme_ii, 1e-12));
    REQUIRE(report.status == SolveStatus::converged);
    const BoundaryCurve initial = extract_initial_geometry(report);
    CHECK(std::abs(initial[0].x - 0.004 / 0.28) <= 1e-11);
    CHECK(std::abs(initial[0].y + 0.006 / 0.28) <= 1e-11);
    const Point2 pushed = initial[0] + field.evaluate(initial[0]);
    CHECK((pushed - point[0]).norm() <= 2e-12);

    const AffineShearVolumetricField strong(0.9);
    const ConvergenceReport dead =
        solve(make_disc(0.01, 10, {}), strong, config_for(SchemeKind::scheme_i, 1e-11));
    REQUIRE(dead.status == SolveStatus::diverged);
    const BoundaryCurve last = extract_initial_geometry(dead);
    for (std::size_t i = 0; i < last.size(); ++i) {
        CHECK(bit_equal(last[i], dead.records.back().m_points[i]));
    }
}

TEST_CASE("solve validates its configuration") {
    const AffineShearVolumetricField field(0.5);
    const BoundaryCurve desired = make_disc(0.01, 5, {});
    CHECK_THROWS_AS(solve(desired, field, config_for(SchemeKind::scheme_ii, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve(desired, field, config_for(SchemeKind::scheme_ii, -1e-9)),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve(desired, field, config_for(SchemeKind::scheme_ii, 1e-9, 0)),
                    std::invalid_argument);
}

TEST_CASE("iterate_step checks the gradient cache size") {
    const AffineShearVolumetricField field(0.5);
    const BoundaryCurve desired = make_disc(0.01, 5, {});
    const SolverConfig config = config_for(SchemeKind::scheme_ii, 1e-9);
    const auto first = first_iteration(desired, field, config);
    const std::vector<Jacobian2> short_cache(3);
    CHECK_THROWS_AS(iterate_step(first.record, desired, field, short_cache, config),
                    std::invalid_argument);
}

TEST_CASE("a uniformly singular corrective system degrades but keeps running") {
    const double critical = 1.0 / std::sqrt(2.0);
    const AffineShearVolumetricField field(critical);
    const BoundaryCurve desired = make_disc(0.01, 10, {});

    SolverConfig config = config_for(SchemeKind::scheme_ii, 1e-12, 6);
    const ConvergenceReport degraded = solve(desired, field, config);
    CHECK(degraded.records.size() == 6);
    for (std::size_t k = 1; k < degraded.records.size(); ++k) {
        CHECK(degraded.records[k].singular_fallbacks == static_cast<int>(desired.size()));
        for (std::size_t i = 0; i < desired.size(); ++i) {
            const Vector2 expected = corrective_scheme_iii(
                degraded.cached_jacobians[i], degraded.records[k - 1].residuals[i]);
            CHECK(bit_equal(degraded.records[k].correctives[i], expected));
        }
    }

    config.singular_fallback = SingularFallback::fail;
    CHECK_THROWS_AS(solve(desired, field, config), SingularSystemError);
}
