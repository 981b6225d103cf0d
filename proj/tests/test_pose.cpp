#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "trayforge/pose.hpp"

namespace tf = trayforge;

namespace {

constexpr double kPi = 3.141592653589793238462643383279;

std::string temp_file(const std::string& tag, const std::string& text) {
    const std::string path =
        (std::filesystem::temp_directory_path() / ("trayforge_pose_" + tag)).string();
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

tf::Mask filled_rect(int w, int h, int x0, int y0, int rw, int rh) {
    tf::Mask m(w, h);
    for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) m.set(x, y);
    return m;
}

/// Rectangle contour: center (cx, cy), half-length a along the theta
/// direction, half-width b across it. Image frame, y down.
std::vector<tf::Vec2> rect_contour(double cx, double cy, double a, double b,
                                   double theta_deg) {
    const double c = std::cos(theta_deg * kPi / 180.0);
    const double s = std::sin(theta_deg * kPi / 180.0);
    return {
        {cx + a * c - b * s, cy + a * s + b * c},
        {cx - a * c - b * s, cy - a * s + b * c},
        {cx - a * c + b * s, cy - a * s - b * c},
        {cx + a * c + b * s, cy + a * s - b * c},
    };
}

/// Independent even-odd rasterization oracle: test each pixel center with a
/// plain crossing-number walk instead of span filling.
bool oracle_inside(const std::vector<tf::Vec2>& poly, double x, double y) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const tf::Vec2& p = poly[i];
        const tf::Vec2& q = poly[j];
        if ((p.y > y) != (q.y > y) && x < (q.x - p.x) * (y - p.y) / (q.y - p.y) + p.x)
            inside = !inside;
    }
    return inside;
}

} // namespace

TEST_CASE("axis-aligned rectangle: exact centroid, angle and elongation") {
    // 30 x 4 rectangle: unit-square pixel moments make the axis ratio exactly
    // the side ratio, so elongation is exactly 7.5.
    const tf::Mask m = filled_rect(64, 32, 10, 11, 30, 4);
    const tf::PoseEstimate est = tf::principal_axes(m);
    CHECK(est.cx_px == Catch::Approx(10 + 29.0 / 2 + 0.5).margin(1e-12));
    CHECK(est.cy_px == Catch::Approx(11 + 3.0 / 2 + 0.5).margin(1e-12));
    CHECK(est.rz_deg == 0.0);
    CHECK(est.elongation == Catch::Approx(7.5).margin(1e-12));
    CHECK_FALSE(est.degenerate);
}

TEST_CASE("vertical rectangle reads 90 degrees") {
    const tf::Mask m = filled_rect(32, 64, 11, 10, 4, 30);
    const tf::PoseEstimate est = tf::principal_axes(m);
    CHECK(est.rz_deg == Catch::Approx(90.0).margin(1e-9));
    CHECK(est.elongation == Catch::Approx(7.5).margin(1e-12));
}

TEST_CASE("diagonal strip reads 45 degrees") {
    tf::Mask m(40, 40);
    for (int i = 0; i < 31; ++i) m.set(i, i);
    const tf::PoseEstimate est = tf::principal_axes(m);
    CHECK(est.rz_deg == Catch::Approx(45.0).margin(1e-9));
    CHECK_FALSE(est.degenerate);
}

TEST_CASE("whole-pixel translation leaves the estimate bit-identical") {
    const auto poly = rect_contour(80, 80, 55, 7, 37.0);
    const tf::Mask base = tf::mask_from_contour(poly, 1.0);

    const int dx = 13, dy = 7;
    tf::Mask shifted(base.width + dx, base.height + dy);
    for (int y = 0; y < base.height; ++y)
        for (int x = 0; x < base.width; ++x)
            if (base.at(x, y)) shifted.set(x + dx, y + dy);

    const tf::PoseEstimate a = tf::principal_axes(base);
    const tf::PoseEstimate b = tf::principal_axes(shifted);
    CHECK(b.rz_deg == a.rz_deg);           // exact, not approximate
    CHECK(b.elongation == a.elongation);
    CHECK(b.cx_px == Catch::Approx(a.cx_px + dx).margin(1e-12));
    CHECK(b.cy_px == Catch::Approx(a.cy_px + dy).margin(1e-12));
}

TEST_CASE("180-degree rotation leaves the angle bit-identical") {
    const auto poly = rect_contour(80, 80, 55, 7, 61.0);
    const tf::Mask base = tf::mask_from_contour(poly, 1.0);

    tf::Mask flipped(base.width, base.height);
    for (int y = 0; y < base.height; ++y)
        for (int x = 0; x < base.width; ++x)
            if (base.at(x, y)) flipped.set(base.width - 1 - x, base.height - 1 - y);

    const tf::PoseEstimate a = tf::principal_axes(base);
    const tf::PoseEstimate b = tf::principal_axes(flipped);
    CHECK(b.rz_deg == a.rz_deg);
    CHECK(b.elongation == a.elongation);
}

TEST_CASE("squares and disks are degenerate") {
    const tf::PoseEstimate sq = tf::principal_axes(filled_rect(40, 40, 5, 5, 20, 20));
    CHECK(sq.degenerate);
    CHECK(sq.rz_deg == 0.0);
    CHECK(sq.elongation == Catch::Approx(1.0).margin(1e-12));

    tf::Mask disk(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if ((x - 31) * (x - 31) + (y - 31) * (y - 31) <= 15 * 15) disk.set(x, y);
    const tf::PoseEstimate d = tf::principal_axes(disk);
    CHECK(d.degenerate);
    CHECK(d.elongation < 1.05);
}

TEST_CASE("empty mask throws") {
    CHECK_THROWS_AS(tf::principal_axes(tf::Mask(16, 16)), tf::EmptyMaskError);
}

TEST_CASE("rotated rectangle contours recover their angle") {
    for (double theta : {12.0, 30.0, 87.5, 120.0, 169.0}) {
        const auto poly = rect_contour(150, 150, 120, 12, theta);
        const tf::Mask m = tf::mask_from_contour(poly, 1.0);
        const tf::PoseEstimate est = tf::principal_axes(m);
        INFO("theta = " << theta);
        CHECK_FALSE(est.degenerate);
        CHECK(est.rz_deg == Catch::Approx(theta).margin(0.8));
        CHECK(est.elongation == Catch::Approx(10.0).margin(0.8));
    }
}

TEST_CASE("contour rasterization matches a point-in-polygon oracle") {
    const std::vector<std::vector<tf::Vec2>> polys = {
        {{1.2, 1.3}, {18.7, 2.1}, {9.4, 15.8}},
        rect_contour(20.3, 17.2, 14.1, 4.3, 28.0),
        {{2.3, 2.2}, {25.6, 3.1}, {27.2, 20.7}, {13.4, 26.2}, {1.7, 14.9}},
    };
    for (const auto& poly : polys) {
        const tf::Mask m = tf::mask_from_contour(poly, 1.0);
        int fg = 0;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                const bool want = oracle_inside(poly, x + 0.5, y + 0.5);
                INFO("pixel (" << x << ", " << y << ")");
                REQUIRE(m.at(x, y) == want);
                fg += want;
            }
        CHECK(fg > 0);
    }
}

TEST_CASE("contour scaling rasterizes at the requested resolution") {
    const std::vector<tf::Vec2> square = {{1, 1}, {5, 1}, {5, 5}, {1, 5}};
    const tf::Mask m1 = tf::mask_from_contour(square, 1.0);
    const tf::Mask m4 = tf::mask_from_contour(square, 4.0);
    long long n1 = 0, n4 = 0;
    for (auto v : m1.data) n1 += v;
    for (auto v : m4.data) n4 += v;
    CHECK(n1 == 16);       // 4 x 4 pixel centers inside
    CHECK(n4 == 16 * 16);  // scales with the square of the resolution
}

TEST_CASE("contour edge cases throw") {
    CHECK_THROWS_AS(tf::mask_from_contour({{0, 0}, {1, 1}}, 1.0), tf::DegeneratePolygonError);
    CHECK_THROWS_AS(tf::mask_from_contour({{0, 0}, {1, 1}, {2, 2}}, 1.0),
                    tf::DegeneratePolygonError);
    CHECK_THROWS_AS(tf::mask_from_contour({{-1, 0}, {5, 0}, {3, 4}}, 1.0), tf::ValidationError);
    CHECK_THROWS_AS(tf::mask_from_contour({{1, 1}, {5, 1}, {3, 4}}, 0.0), tf::ValidationError);
}

TEST_CASE("contour csv parsing") {
    const std::string path = temp_file("contour.csv", "# outline\n1.5,2.5\n\n3,4\n  5 , 6\n");
    const std::vector<tf::Vec2> pts = tf::load_contour_csv(path);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].x == 1.5);
    CHECK(pts[2].y == 6.0);

    const std::string bad = temp_file("badcontour.csv", "1.5;2.5\n");
    CHECK_THROWS_AS(tf::load_contour_csv(bad), tf::ParseError);
    CHECK_THROWS_AS(tf::load_contour_csv("/nonexistent.csv"), tf::ParseError);
}

TEST_CASE("pgm masks load with comments and threshold at half maxval") {
    std::string body = "P5\n# camera 3\n4 2\n255\n";
    const unsigned char raw[8] = {0, 127, 128, 255, 1, 200, 90, 130};
    body.append(reinterpret_cast<const char*>(raw), 8);
    const std::string path = temp_file("mask.pgm", body);

    const tf::Mask m = tf::load_mask_pgm(path);
    REQUIRE(m.width == 4);
    REQUIRE(m.height == 2);
    const bool want[8] = {false, false, true, true, false, true, false, true};
    for (int i = 0; i < 8; ++i) CHECK(m.data[i] == (want[i] ? 1 : 0));

    const std::string trunc = temp_file("trunc.pgm", "P5\n4 2\n255\n\0x");
    CHECK_THROWS_AS(tf::load_mask_pgm(trunc), tf::ParseError);
    const std::string not_pgm = temp_file("notpgm.pgm", "P2\n4 2\n255\n");
    CHECK_THROWS_AS(tf::load_mask_pgm(not_pgm), tf::ParseError);
}

TEST_CASE("pgm round-trips") {
    tf::Mask m(7, 5);
    m.set(1, 1);
    m.set(6, 4);
    m.set(3, 2);
    const std::string path =
        (std::filesystem::temp_directory_path() / "trayforge_pose_rt.pgm").string();
    tf::save_mask_pgm(m, path);
    const tf::Mask back = tf::load_mask_pgm(path);
    REQUIRE(back.width == m.width);
    REQUIRE(back.height == m.height);
    CHECK(back.data == m.data);
}

TEST_CASE("calibration maps pixel poses to the bench frame") {
    const tf::Mask m = filled_rect(64, 32, 10, 11, 30, 4);
    const tf::PoseEstimate est = tf::principal_axes(m);

    SECTION("identity") {
        const tf::Calibration cal =
            tf::calibration_from_json(tf::json::parse(R"({"homography":
                [[1,0,0],[0,1,0],[0,0,1]]})"), "mem");
        const tf::WorldPose wp = tf::to_world(est, cal);
        CHECK(wp.x_mm == Catch::Approx(est.cx_px).margin(1e-9));
        CHECK(wp.y_mm == Catch::Approx(est.cy_px).margin(1e-9));
        CHECK(wp.rz_deg == Catch::Approx(est.rz_deg).margin(1e-9));
    }

    SECTION("scale and translation") {
        const tf::Calibration cal =
            tf::calibration_from_json(tf::json::parse(R"({"homography":
                [[2,0,10],[0,2,20],[0,0,1]]})"), "mem");
        const tf::WorldPose wp = tf::to_world(est, cal);
        CHECK(wp.x_mm == Catch::Approx(2 * est.cx_px + 10).margin(1e-9));
        CHECK(wp.y_mm == Catch::Approx(2 * est.cy_px + 20).margin(1e-9));
        CHECK(wp.rz_deg == Catch::Approx(0.0).margin(1e-9));
    }

    SECTION("rotation folds into [0, 180)") {
        const tf::Calibration cal =
            tf::calibration_from_json(tf::json::parse(R"({"homography":
                [[0,-1,0],[1,0,0],[0,0,1]]})"), "mem");
        tf::PoseEstimate angled = est;
        angled.rz_deg = 30.0;
        const tf::WorldPose wp = tf::to_world(angled, cal);
        CHECK(wp.rz_deg == Catch::Approx(120.0).margin(1e-9));
    }
}

TEST_CASE("calibration rejects singular homographies and flags bad residuals") {
    CHECK_THROWS_AS(tf::calibration_from_json(tf::json::parse(R"({"homography":
        [[1,0,0],[2,0,0],[0,0,1]]})"), "mem"),
                    tf::SingularCalibrationError);
    CHECK_THROWS_AS(tf::calibration_from_json(tf::json::parse(R"({"homography":
        [[1,0,0],[0,1,0]]})"), "mem"),
                    tf::ParseError);

    const tf::Calibration good = tf::calibration_from_json(tf::json::parse(R"({"homography":
        [[1,0,0],[0,1,0],[0,0,1]],"reprojection_error_px":0.12})"), "mem");
    CHECK_FALSE(good.suspect());
    const tf::Calibration bad = tf::calibration_from_json(tf::json::parse(R"({"homography":
        [[1,0,0],[0,1,0],[0,0,1]],"reprojection_error_px":0.31})"), "mem");
    CHECK(bad.suspect());

    // A projectively valid map can still push one point to the horizon.
    const tf::Calibration horizon = tf::calibration_from_json(tf::json::parse(R"({"homography":
        [[1,0,0],[0,1,0],[-1,0,1]]})"), "mem");
    CHECK_THROWS_AS(horizon.apply({1.0, 0.5}), tf::SingularCalibrationError);
}

TEST_CASE("pose json carries the world block only when calibrated") {
    tf::PoseEstimate est;
    est.cx_px = 12.3456789;
    est.cy_px = 4.0;
    est.rz_deg = 91.25;
    est.elongation = 3.5;

    const tf::json bare = tf::pose_to_json(est, std::nullopt);
    CHECK(bare["cx_px"] == 12.345679);
    CHECK_FALSE(bare.contains("world"));

    tf::WorldPose wp{100.5, 200.25, 30.0};
    const tf::json full = tf::pose_to_json(est, wp);
    REQUIRE(full.contains("world"));
    CHECK(full["world"]["x_mm"] == 100.5);
    CHECK(full["world"]["rz_deg"] == 30.0);
}
