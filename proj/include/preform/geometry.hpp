#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace preform {

/// Planar position, in the problem's length unit.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Planar displacement between positions.
struct Vector2 {
    double dx = 0.0;
    double dy = 0.0;

    /// Euclidean length.
    double norm() const;

    friend bool operator==(const Vector2&, const Vector2&) = default;
};

[[nodiscard]] bool is_finite(const Point2& p);
[[nodiscard]] bool is_finite(const Vector2& v);

inline Vector2 operator+(Vector2 a, Vector2 b) { return {a.dx + b.dx, a.dy + b.dy}; }
inline Vector2 operator-(Vector2 a, Vector2 b) { return {a.dx - b.dx, a.dy - b.dy}; }
inline Vector2 operator-(Vector2 a) { return {-a.dx, -a.dy}; }
inline Vector2 operator*(double s, Vector2 v) { return {s * v.dx, s * v.dy}; }
inline Point2 operator+(Point2 p, Vector2 v) { return {p.x + v.dx, p.y + v.dy}; }
inline Vector2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }

/// Ordered boundary nodes of a planar shape. The index of a node is its
/// identity: every operation that derives one curve from another preserves
/// length and order, so index i always refers to the same material point.
///
/// A curve is an ordered point set, not a polygon; adjacency is never used.
/// Curves are immutable after construction and hold at least one finite
/// point, so they are safe to share across threads.
class BoundaryCurve {
public:
    explicit BoundaryCurve(std::vector<Point2> points, std::string label = {});

    const std::vector<Point2>& points() const noexcept { return points_; }
    const std::string& label() const noexcept { return label_; }
    std::size_t size() const noexcept { return points_.size(); }
    const Point2& operator[](std::size_t i) const noexcept { return points_[i]; }

private:
    std::vector<Point2> points_;
    std::string label_;
};

/// n_points equally spaced nodes on a circle, counter-clockwise starting at
/// angle zero: node k sits at angle 2*pi*k/n_points. Nodes that land on the
/// coordinate axes are exact (no trig rounding).
BoundaryCurve make_disc(double radius, int n_points, Point2 center = {});

/// Diagonal of the curve's axis-aligned bounding box. Zero for curves whose
/// points coincide.
double characteristic_length(const BoundaryCurve& curve);

/// Malformed CSV input; the message names the offending 1-based line.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads a point set from CSV: header exactly `x,y`, one `<float>,<float>`
/// row per node, LF line endings.
BoundaryCurve read_curve(std::istream& in, std::string label = {});

/// Writes the CSV form read by read_curve. Coordinates are emitted as the
/// shortest decimal that parses back to the same bits, so
/// read_curve(write_curve(c)) reproduces c exactly.
void write_curve(const BoundaryCurve& curve, std::ostream& out);

/// Shortest decimal string that parses back to exactly v.
std::string format_double(double v);

namespace detail {

/// Rows of a strict two-column CSV: exact header match, exactly two finite
/// decimal fields per row, no stray whitespace. Throws ParseError naming the
/// failing 1-based line.
std::vector<std::array<double, 2>> read_two_column_csv(std::istream& in,
                                                       std::string_view header);

void write_two_column_csv(std::ostream& out, std::string_view header,
                          const std::vector<std::array<double, 2>>& rows);

}  // namespace detail

}  // namespace preform
