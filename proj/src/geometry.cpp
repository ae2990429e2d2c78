#include "preform/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <utility>

namespace preform {

double Vector2::norm() const { return std::hypot(dx, dy); }

bool is_finite(const Point2& p) { return std::isfinite(p.x) && std::isfinite(p.y); }
bool is_finite(const Vector2& v) { return std::isfinite(v.dx) && std::isfinite(v.dy); }

BoundaryCurve::BoundaryCurve(std::vector<Point2> points, std::string label)
    : points_(std::move(points)), label_(std::move(label)) {
    if (points_.empty()) {
        throw std::invalid_argument("BoundaryCurve: needs at least one point");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!is_finite(points_[i])) {
            throw std::invalid_argument("BoundaryCurve: non-finite coordinates at node " +
                                        std::to_string(i));
        }
    }
}

BoundaryCurve make_disc(double radius, int n_points, Point2 center) {
    if (!std::isfinite(radius) || radius <= 0.0) {
        throw std::invalid_argument("make_disc: radius must be positive and finite");
    }
    if (n_points < 3) {
        throw std::invalid_argument("make_disc: need n_points >= 3");
    }
    if (!is_finite(center)) {
        throw std::invalid_argument("make_disc: non-finite center");
    }

    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(n_points));
    for (int k = 0; k < n_points; ++k) {
        double c;
        double s;
        const long long quarters = 4LL * k;
        if (quarters % n_points == 0) {
            // Node sits on a coordinate axis; use exact unit components.
            switch ((quarters / n_points) % 4) {
                case 0: c = 1.0; s = 0.0; break;
                case 1: c = 0.0; s = 1.0; break;
                case 2: c = -1.0; s = 0.0; break;
                default: c = 0.0; s = -1.0; break;
            }
        } else {
            const double angle = 2.0 * std::numbers::pi * k / n_points;
            c = std::cos(angle);
            s = std::sin(angle);
        }
        pts.push_back({center.x + radius * c, center.y + radius * s});
    }
    return BoundaryCurve(std::move(pts), "disc");
}

double characteristic_length(const BoundaryCurve& curve) {
    double min_x = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double min_y = min_x;
    double max_y = max_x;
    for (const Point2& p : curve.points()) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    return std::hypot(max_x - min_x, max_y - min_y);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_field(std::string_view text, std::size_t line_no, std::string_view column) {
    double value{};
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(text.data(), last, value);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse " +
                         std::string(column) + " field '" + std::string(text) + "'");
    }
    if (!std::isfinite(value)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-finite " +
                         std::string(column) + " value '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

namespace detail {

std::vector<std::array<double, 2>> read_two_column_csv(std::istream& in,
                                                       std::string_view header) {
    const auto comma_in_header = header.find(',');
    const std::string col0(header.substr(0, comma_in_header));
    const std::string col1(header.substr(comma_in_header + 1));

    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("line 1: empty input, expected header '" + std::string(header) + "'");
    }
    if (line != header) {
        throw ParseError("line 1: expected header '" + std::string(header) + "', got '" +
                         line + "'");
    }

    std::vector<std::array<double, 2>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected exactly two comma-separated fields");
        }
        const std::string_view view(line);
        rows.push_back({parse_field(view.substr(0, comma), line_no, col0),
                        parse_field(view.substr(comma + 1), line_no, col1)});
    }
    if (rows.empty()) {
        throw ParseError("line 2: expected at least one data row");
    }
    return rows;
}

void write_two_column_csv(std::ostream& out, std::string_view header,
                          const std::vector<std::array<double, 2>>& rows) {
    out << header << '\n';
    for (const auto& row : rows) {
        out << format_double(row[0]) << ',' << format_double(row[1]) << '\n';
    }
}

}  // namespace detail

BoundaryCurve read_curve(std::istream& in, std::string label) {
    const auto rows = detail::read_two_column_csv(in, "x,y");
    std::vector<Point2> pts;
    pts.reserve(rows.size());
    for (const auto& row : rows) {
        pts.push_back({row[0], row[1]});
    }
    return BoundaryCurve(std::move(pts), std::move(label));
}

void write_curve(const BoundaryCurve& curve, std::ostream& out) {
    std::vector<std::array<double, 2>> rows;
    rows.reserve(curve.size());
    for (const Point2& p : curve.points()) {
        rows.push_back({p.x, p.y});
    }
    detail::write_two_column_csv(out, "x,y", rows);
}

}  // namespace preform
