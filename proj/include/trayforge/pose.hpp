#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "trayforge/catalog.hpp"
#include "trayforge/errors.hpp"
#include "trayforge/geometry.hpp"

namespace trayforge {

/// Calibrations reprojecting worse than this are flagged as suspect.
inline constexpr double kReprojectionWarnPx = 0.3;

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

/// Binary image, row-major, nonzero = foreground. Pixel (x, y) covers the
/// unit square with center (x + 0.5, y + 0.5); y grows downward.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool fg = true) {
        data[static_cast<std::size_t>(y) * width + x] = fg ? 1 : 0;
    }
};

inline Mask load_mask_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);

    auto next_token = [&]() -> std::string {
        std::string tok;
        int ch;
        while ((ch = in.get()) != EOF) {
            if (ch == '#') {
                while ((ch = in.get()) != EOF && ch != '\n') {
                }
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
        if (tok.empty()) throw ParseError(path + ": truncated PGM header");
        return tok;
    };

    if (next_token() != "P5") throw ParseError(path + ": expected binary PGM (P5)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw ParseError(path + ": malformed PGM header");
    }
    if (w <= 0 || h <= 0) throw ParseError(path + ": PGM dimensions must be positive");
    if (maxval <= 0 || maxval > 255)
        throw ParseError(path + ": PGM maxval must be in [1, 255]");
    // next_token consumed exactly one whitespace byte after maxval; raw data
    // starts here.
    Mask m(w, h);
    std::vector<char> raw(static_cast<std::size_t>(w) * h);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError(path + ": truncated PGM data");
    for (std::size_t i = 0; i < raw.size(); ++i)
        m.data[i] = (static_cast<unsigned char>(raw[i]) * 2 > maxval) ? 1 : 0;
    return m;
}

inline void save_mask_pgm(const Mask& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << "P5\n" << m.width << " " << m.height << "\n255\n";
    for (std::uint8_t px : m.data) out.put(px ? '\xff' : '\0');
    if (!out) throw ParseError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Principal axes
// ---------------------------------------------------------------------------

/// Shapes whose axis ratio falls under this are reported as degenerate:
/// the major direction is numerically meaningless noise.
inline constexpr double kDegenerateAxisRatio = 1.05;

struct PoseEstimate {
    double cx_px = 0.0;     // centroid (pixel-center coordinates)
    double cy_px = 0.0;
    double rz_deg = 0.0;    // major-axis direction in [0, 180), y-down frame
    double elongation = 1.0; // sqrt of the axis ratio, >= 1
    bool degenerate = false;
};

/// PCA over the filled region. All second moments are integers (pixels are
/// unit squares, the 1/12 square term is folded in at x12 scale), so masks
/// related by whole-pixel translation or 180-degree rotation produce
/// bit-identical angles — not merely close ones.
inline PoseEstimate principal_axes(const Mask& m) {
    long long n = 0, sx = 0, sy = 0;
    __int128 sxx = 0, syy = 0, sxy = 0;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            ++n;
            sx += x;
            sy += y;
            sxx += static_cast<__int128>(x) * x;
            syy += static_cast<__int128>(y) * y;
            sxy += static_cast<__int128>(x) * y;
        }
    }
    if (n == 0) throw EmptyMaskError("mask has no foreground pixels");

    // 12 n^2 cov = 12 (n S2 - S1^2) + n^2 I  — exact in 128-bit integers.
    const __int128 n128 = n;
    const __int128 a = 12 * (n128 * sxx - static_cast<__int128>(sx) * sx) + n128 * n128;
    const __int128 c = 12 * (n128 * syy - static_cast<__int128>(sy) * sy) + n128 * n128;
    const __int128 b = 12 * (n128 * sxy - static_cast<__int128>(sx) * sy);

    const long double al = static_cast<long double>(a);
    const long double cl = static_cast<long double>(c);
    const long double bl = static_cast<long double>(b);
    const long double disc = std::sqrt((al - cl) * (al - cl) + 4.0L * bl * bl);
    const long double lmaj = 0.5L * (al + cl + disc);
    const long double lmin = std::max(0.5L * (al + cl - disc), 1e-30L);

    PoseEstimate est;
    est.cx_px = static_cast<double>(sx) / static_cast<double>(n) + 0.5;
    est.cy_px = static_cast<double>(sy) / static_cast<double>(n) + 0.5;
    est.elongation = static_cast<double>(std::sqrt(lmaj / lmin));
    est.degenerate = lmaj < kDegenerateAxisRatio * lmin;

    if (est.degenerate) {
        est.rz_deg = 0.0;
    } else {
        double deg = static_cast<double>(
            0.5L * std::atan2(2.0L * bl, al - cl) * 180.0L / 3.141592653589793238462643383279L);
        if (deg < 0.0) deg += 180.0;
        if (deg >= 180.0) deg -= 180.0;
        est.rz_deg = deg;
    }
    return est;
}

// ---------------------------------------------------------------------------
// Contour rasterization
// ---------------------------------------------------------------------------

/// CSV of "x,y" lines; blank lines and #-comments are skipped.
inline std::vector<Vec2> load_contour_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<Vec2> pts;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected \"x,y\"");
        try {
            pts.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected \"x,y\"");
        }
    }
    return pts;
}

/// Rasterize a closed polygon (given in some planar unit, e.g. mm) onto a
/// fresh mask at `px_per_unit` resolution. Even-odd fill, sampled at pixel
/// centers. Coordinates must be nonnegative.
inline Mask mask_from_contour(const std::vector<Vec2>& contour, double px_per_unit) {
    if (px_per_unit <= 0) throw ValidationError("px_per_unit must be > 0");
    if (contour.size() < 3)
        throw DegeneratePolygonError("contour needs at least 3 points");

    std::vector<Vec2> pts;
    pts.reserve(contour.size());
    double max_x = 0.0, max_y = 0.0, area2 = 0.0;
    for (std::size_t i = 0; i < contour.size(); ++i) {
        if (contour[i].x < 0 || contour[i].y < 0)
            throw ValidationError("contour coordinates must be nonnegative");
        pts.push_back({contour[i].x * px_per_unit, contour[i].y * px_per_unit});
        max_x = std::max(max_x, pts.back().x);
        max_y = std::max(max_y, pts.back().y);
        const Vec2& p = contour[i];
        const Vec2& q = contour[(i + 1) % contour.size()];
        area2 += p.x * q.y - q.x * p.y;
    }
    if (std::abs(area2) < 1e-12) throw DegeneratePolygonError("contour has zero area");

    const int w = static_cast<int>(std::ceil(max_x)) + 1;
    const int h = static_cast<int>(std::ceil(max_y)) + 1;
    Mask m(w, h);
    for (int iy = 0; iy < h; ++iy) {
        const double y = iy + 0.5;
        std::vector<double> crossings;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const Vec2& p = pts[i];
            const Vec2& q = pts[(i + 1) % pts.size()];
            if ((p.y > y) == (q.y > y)) continue;
            crossings.push_back(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
        }
        std::sort(crossings.begin(), crossings.end());
        for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
            const int x0 = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
            const int x1 = std::min(w - 1, static_cast<int>(std::floor(crossings[k + 1] - 0.5)));
            for (int ix = x0; ix <= x1; ++ix) m.set(ix, iy);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Planar homography taking pixel coordinates (u, v) to bench-frame
/// millimeters. reprojection_error_px records the calibration residual.
struct Calibration {
    std::array<std::array<double, 3>, 3> h{};
    double reprojection_error_px = 0.0;

    double det() const {
        return h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
               h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
               h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    }

    bool suspect() const { return reprojection_error_px > kReprojectionWarnPx; }

    Vec2 apply(Vec2 px) const {
        const double X = h[0][0] * px.x + h[0][1] * px.y + h[0][2];
        const double Y = h[1][0] * px.x + h[1][1] * px.y + h[1][2];
        const double W = h[2][0] * px.x + h[2][1] * px.y + h[2][2];
        if (std::abs(W) < 1e-12)
            throw SingularCalibrationError("homography maps point to infinity");
        return {X / W, Y / W};
    }
};

inline Calibration calibration_from_json(const json& j, const std::string& where) {
    Calibration cal;
    if (!j.is_object() || !j.contains("homography"))
        throw ParseError(where + ": expected {\"homography\":[[..],[..],[..]]}");
    const json& rows = j["homography"];
    if (!rows.is_array() || rows.size() != 3)
        throw ParseError(where + ": homography must have 3 rows");
    for (int r = 0; r < 3; ++r) {
        if (!rows[r].is_array() || rows[r].size() != 3)
            throw ParseError(where + ": homography rows must have 3 entries");
        for (int c = 0; c < 3; ++c) {
            if (!rows[r][c].is_number())
                throw ParseError(where + ": homography entries must be numbers");
            cal.h[r][c] = rows[r][c].get<double>();
        }
    }
    if (j.contains("reprojection_error_px"))
        cal.reprojection_error_px = j["reprojection_error_px"].get<double>();
    if (std::abs(cal.det()) < 1e-9)
        throw SingularCalibrationError(where + ": homography is singular");
    return cal;
}

inline Calibration load_calibration(const std::string& path) {
    return calibration_from_json(detail::parse_json_file(path), path);
}

// ---------------------------------------------------------------------------
// Full pose estimate
// ---------------------------------------------------------------------------

struct WorldPose {
    double x_mm = 0.0;
    double y_mm = 0.0;
    double rz_deg = 0.0; // folded to [0, 180) in the bench frame
};

/// Map an image-frame pose through the calibration. The direction is carried
/// by a unit chord from the centroid, so it survives any projective map.
inline WorldPose to_world(const PoseEstimate& est, const Calibration& cal) {
    WorldPose wp;
    const Vec2 origin = cal.apply({est.cx_px, est.cy_px});
    wp.x_mm = origin.x;
    wp.y_mm = origin.y;
    if (!est.degenerate) {
        const double rad = est.rz_deg * 3.141592653589793238462643383279 / 180.0;
        const Vec2 tip =
            cal.apply({est.cx_px + std::cos(rad), est.cy_px + std::sin(rad)});
        double deg = std::atan2(tip.y - origin.y, tip.x - origin.x) * 180.0 /
                     3.141592653589793238462643383279;
        if (deg < 0.0) deg += 180.0;
        if (deg >= 180.0) deg -= 180.0;
        wp.rz_deg = deg;
    }
    return wp;
}

inline json pose_to_json(const PoseEstimate& est, const std::optional<WorldPose>& world) {
    json j;
    j["cx_px"] = round6(est.cx_px);
    j["cy_px"] = round6(est.cy_px);
    j["rz_deg"] = round6(est.rz_deg);
    j["elongation"] = round6(std::min(est.elongation, 1e6));
    j["degenerate"] = est.degenerate;
    if (world) {
        j["world"] = json{{"x_mm", round6(world->x_mm)},
                          {"y_mm", round6(world->y_mm)},
                          {"rz_deg", round6(world->rz_deg)}};
    }
    return j;
}

} // namespace trayforge
