#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "error.hpp"
#include "image.hpp"

namespace anomet {

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
    friend auto operator<=>(const Point&, const Point&) = default;
};

struct PointD {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const PointD&, const PointD&) = default;
};

/// Straight (axis-aligned) bounding rectangle, inclusive pixel coordinates.
struct BoundingRect {
    int min_x = 0;
    int min_y = 0;
    int max_x = 0;
    int max_y = 0;

    int width() const { return max_x - min_x; }
    int height() const { return max_y - min_y; }
    /// Number of pixel columns/rows covered (inclusive extent).
    int pixel_width() const { return max_x - min_x + 1; }
    int pixel_height() const { return max_y - min_y + 1; }

    bool valid() const { return min_x <= max_x && min_y <= max_y; }
    bool contains(Point p) const { return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y; }

    friend bool operator==(const BoundingRect&, const BoundingRect&) = default;
};

/// One labeled inclusion.
///
/// `mask` is the component cropped to `rect` (pixel_width x pixel_height) and is
/// only present for impurities extracted from a raster in this process; stores
/// loaded from disk carry geometry only.
struct Impurity {
    int id = 0;
    std::vector<Point> contour;
    std::int64_t area = 0;
    BoundingRect rect;
    std::optional<BinaryImage> mask;
    std::optional<BinaryImage> shape_image;
};

struct EnclosingCircle {
    PointD center;
    double radius = 0.0;

    double area() const { return M_PI * radius * radius; }
};

/// Distance between the boundaries of two straight bounding rectangles.
/// Intersecting or touching rectangles are at distance 0. When the projections
/// overlap on one axis this is the gap along the other; otherwise it is the
/// corner-to-corner distance. Symmetric and non-negative, but neither a metric
/// nor a semi-metric: distinct rectangles can be at distance 0 and the triangle
/// inequality does not hold.
inline double rect_distance(const BoundingRect& a, const BoundingRect& b) {
    const bool overlap_x = a.min_x <= b.max_x && b.min_x <= a.max_x;
    const bool overlap_y = a.min_y <= b.max_y && b.min_y <= a.max_y;
    if (overlap_x && overlap_y) return 0.0;

    const double gap_x = a.max_x < b.min_x ? double(b.min_x - a.max_x) : double(a.min_x - b.max_x);
    const double gap_y = a.max_y < b.min_y ? double(b.min_y - a.max_y) : double(a.min_y - b.max_y);
    if (overlap_y) return gap_x;
    if (overlap_x) return gap_y;
    return std::sqrt(gap_x * gap_x + gap_y * gap_y);
}

inline PointD rect_center(const BoundingRect& r) {
    return {(r.min_x + r.max_x) / 2.0, (r.min_y + r.max_y) / 2.0};
}

inline double rect_diagonal(const BoundingRect& r) {
    const double w = r.width();
    const double h = r.height();
    return std::sqrt(w * w + h * h);
}

inline double distance(PointD a, PointD b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

namespace detail {

inline EnclosingCircle circle_from(PointD a, PointD b) {
    PointD c{(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
    return {c, distance(a, b) / 2.0};
}

inline bool covers(const EnclosingCircle& c, PointD p) {
    return distance(c.center, p) <= c.radius * (1.0 + 1e-12) + 1e-9;
}

inline EnclosingCircle circle_from(PointD a, PointD b, PointD c) {
    const double bx = b.x - a.x, by = b.y - a.y;
    const double cx = c.x - a.x, cy = c.y - a.y;
    const double d = 2.0 * (bx * cy - by * cx);
    if (std::abs(d) < 1e-12) {
        // Collinear: the circle on the extreme pair covers the middle point.
        EnclosingCircle best = circle_from(a, b);
        for (auto cand : {circle_from(a, c), circle_from(b, c)})
            if (cand.radius > best.radius) best = cand;
        return best;
    }
    const double b2 = bx * bx + by * by;
    const double c2 = cx * cx + cy * cy;
    PointD center{a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
    const double r = std::max({distance(center, a), distance(center, b), distance(center, c)});
    return {center, r};
}

} // namespace detail

/// Minimal-radius circle covering all points (randomized incremental
/// construction, expected linear time). The shuffle uses a fixed seed so the
/// result is reproducible.
inline EnclosingCircle smallest_enclosing_circle(std::span<const PointD> input) {
    if (input.empty()) throw InvalidInput("smallest_enclosing_circle: empty point list");

    std::vector<PointD> pts(input.begin(), input.end());
    std::mt19937_64 rng(0x5eedc1c1eULL);
    std::shuffle(pts.begin(), pts.end(), rng);

    EnclosingCircle c{pts[0], 0.0};
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (detail::covers(c, pts[i])) continue;
        c = {pts[i], 0.0};
        for (std::size_t j = 0; j < i; ++j) {
            if (detail::covers(c, pts[j])) continue;
            c = detail::circle_from(pts[i], pts[j]);
            for (std::size_t k = 0; k < j; ++k) {
                if (detail::covers(c, pts[k])) continue;
                c = detail::circle_from(pts[i], pts[j], pts[k]);
            }
        }
    }
    return c;
}

/// Outline points used for shape measures: the four corners of every contour
/// pixel, so the outline encloses exactly the pixel area counted by `area`.
inline std::vector<PointD> contour_corner_points(std::span<const Point> contour) {
    std::vector<Point> corners;
    corners.reserve(contour.size() * 4);
    for (auto p : contour) {
        corners.push_back({p.x, p.y});
        corners.push_back({p.x + 1, p.y});
        corners.push_back({p.x, p.y + 1});
        corners.push_back({p.x + 1, p.y + 1});
    }
    std::sort(corners.begin(), corners.end());
    corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
    std::vector<PointD> out;
    out.reserve(corners.size());
    for (auto p : corners) out.push_back({double(p.x), double(p.y)});
    return out;
}

} // namespace anomet
