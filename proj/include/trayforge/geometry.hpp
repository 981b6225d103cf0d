#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace trayforge {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Oriented rectangle: center, half extents, rotation about the center.
/// angle_rad = 0 puts the `hx` extent along +x.
struct OrientedRect {
    Vec2 center;
    double hx = 0.0;
    double hy = 0.0;
    double angle_rad = 0.0;

    std::array<Vec2, 4> corners() const {
        const double c = std::cos(angle_rad), s = std::sin(angle_rad);
        const Vec2 ux{c, s}, uy{-s, c};
        return {center + hx * ux + hy * uy, center - hx * ux + hy * uy,
                center - hx * ux - hy * uy, center + hx * ux - hy * uy};
    }

    /// Half width of the axis-aligned bounding box along x / y.
    double aabb_hx() const {
        return std::abs(hx * std::cos(angle_rad)) + std::abs(hy * std::sin(angle_rad));
    }
    double aabb_hy() const {
        return std::abs(hx * std::sin(angle_rad)) + std::abs(hy * std::cos(angle_rad));
    }
};

namespace detail {

inline std::pair<double, double> project(const OrientedRect& r, Vec2 axis) {
    double lo = 1e300, hi = -1e300;
    for (const Vec2& p : r.corners()) {
        const double v = dot(p, axis);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

} // namespace detail

/// Separating-axis test for two oriented rectangles. Interiors must meet:
/// rectangles that merely touch along an edge do not count as overlapping.
/// Pass a positive `gap_tol` to treat near-touch (within gap_tol) as overlap.
inline bool rects_overlap(const OrientedRect& a, const OrientedRect& b, double gap_tol = 0.0) {
    const std::array<Vec2, 4> axes = {
        Vec2{std::cos(a.angle_rad), std::sin(a.angle_rad)},
        Vec2{-std::sin(a.angle_rad), std::cos(a.angle_rad)},
        Vec2{std::cos(b.angle_rad), std::sin(b.angle_rad)},
        Vec2{-std::sin(b.angle_rad), std::cos(b.angle_rad)},
    };
    for (const Vec2& axis : axes) {
        auto [alo, ahi] = detail::project(a, axis);
        auto [blo, bhi] = detail::project(b, axis);
        if (ahi + gap_tol <= blo || bhi + gap_tol <= alo) return false;
    }
    return true;
}

/// Intersection area of two axis-aligned rectangles given as [x0,x1]x[y0,y1].
inline double aabb_intersection_area(double ax0, double ay0, double ax1, double ay1,
                                     double bx0, double by0, double bx1, double by1) {
    const double w = std::min(ax1, bx1) - std::max(ax0, bx0);
    const double h = std::min(ay1, by1) - std::max(ay0, by0);
    return (w > 0 && h > 0) ? w * h : 0.0;
}

/// Area of rect `q` covered by the union of axis-aligned rects `cover`,
/// computed by coordinate compression. All rects are [x0,x1]x[y0,y1].
inline double covered_area(const std::array<double, 4>& q,
                           const std::vector<std::array<double, 4>>& cover) {
    std::vector<double> xs = {q[0], q[2]}, ys = {q[1], q[3]};
    for (const auto& r : cover) {
        xs.push_back(std::clamp(r[0], q[0], q[2]));
        xs.push_back(std::clamp(r[2], q[0], q[2]));
        ys.push_back(std::clamp(r[1], q[1], q[3]));
        ys.push_back(std::clamp(r[3], q[1], q[3]));
    }
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
            const double cx = 0.5 * (xs[i] + xs[i + 1]);
            const double cy = 0.5 * (ys[j] + ys[j + 1]);
            const double cell = (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            if (cell <= 0) continue;
            for (const auto& r : cover) {
                if (cx > r[0] && cx < r[2] && cy > r[1] && cy < r[3]) {
                    area += cell;
                    break;
                }
            }
        }
    }
    return area;
}

inline double clamp_to(double v, double lo, double hi) {
    if (lo > hi) return 0.5 * (lo + hi);
    return std::clamp(v, lo, hi);
}

} // namespace trayforge
