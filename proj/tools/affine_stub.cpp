// Reference external solver for the file-exchange adapter: reads
// <workdir>/points_in.csv, applies the affine shear/volumetric field, writes
// <workdir>/displacements_out.csv. Used by tests and as a template for real
// solver wrappers.

#include "preform/fields.hpp"
#include "preform/geometry.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: affine_stub <alpha> <workdir>\n";
        return 1;
    }

    double alpha = 0.0;
    const std::string alpha_text = argv[1];
    const auto res =
        std::from_chars(alpha_text.data(), alpha_text.data() + alpha_text.size(), alpha);
    if (res.ec != std::errc{} || res.ptr != alpha_text.data() + alpha_text.size()) {
        std::cerr << "affine_stub: cannot parse alpha '" << alpha_text << "'\n";
        return 1;
    }

    const std::filesystem::path workdir = argv[2];
    try {
        std::ifstream in(workdir / "points_in.csv");
        if (!in) {
            std::cerr << "affine_stub: cannot open " << (workdir / "points_in.csv") << "\n";
            return 1;
        }
        const preform::BoundaryCurve points = preform::read_curve(in);

        const preform::AffineShearVolumetricField field(alpha);
        const std::vector<preform::Vector2> displacements =
            field.evaluate_batch(points.points());

        std::ofstream out(workdir / "displacements_out.csv");
        if (!out) {
            std::cerr << "affine_stub: cannot write "
                      << (workdir / "displacements_out.csv") << "\n";
            return 1;
        }
        preform::write_displacements(displacements, out);
        if (!out.flush()) {
            std::cerr << "affine_stub: write failed\n";
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "affine_stub: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
