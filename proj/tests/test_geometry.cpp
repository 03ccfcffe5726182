#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "iron/geometry.hpp"

using namespace iron;

namespace {

// Independent projection path for the oracle: explicit pinhole projection of
// the ground plane, composed rotation written out longhand.
Vec2 project_ground(const PoseParams& pose, const CameraModel& cam, double xr, double yr) {
    const double E = cam.reference_gsd * xr;
    const double N = -cam.reference_gsd * yr;
    const double cx = pose.theta_z, cy = pose.theta_x, cz = cam.nominal_height + pose.theta_y;
    // camera-to-world = nadir * Rz(a) * Ry(b) * Rx(g)
    const double ca = std::cos(pose.alpha), sa = std::sin(pose.alpha);
    const double cb = std::cos(pose.beta), sb = std::sin(pose.beta);
    const double cg = std::cos(pose.gamma), sg = std::sin(pose.gamma);
    double r[3][3] = {{ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg},
                      {sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg},
                      {-sb, cb * sg, cb * cg}};
    double m[3][3];  // nadir * r, nadir = diag(1, -1, -1)
    for (int c = 0; c < 3; ++c) {
        m[0][c] = r[0][c];
        m[1][c] = -r[1][c];
        m[2][c] = -r[2][c];
    }
    // world->camera is the transpose; camera coords of the ground point
    const double wx = E - cx, wy = N - cy, wz = -cz;
    const double xc = m[0][0] * wx + m[1][0] * wy + m[2][0] * wz;
    const double yc = m[0][1] * wx + m[1][1] * wy + m[2][1] * wz;
    const double zc = m[0][2] * wx + m[1][2] * wy + m[2][2] * wz;
    return {cam.focal_px * xc / zc + cam.principal_point.x,
            cam.focal_px * yc / zc + cam.principal_point.y};
}

// Four-point DLT with h22 pinned to 1; Gaussian elimination with partial
// pivoting on the 8x8 system.
Homography dlt_from_pairs(const Vec2 (&p)[4], const Vec2 (&q)[4]) {
    double a[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        const double px = p[i].x, py = p[i].y, qx = q[i].x, qy = q[i].y;
        double* r1 = a[2 * i];
        double* r2 = a[2 * i + 1];
        r1[0] = px; r1[1] = py; r1[2] = 1; r1[6] = -qx * px; r1[7] = -qx * py; r1[8] = qx;
        r2[3] = px; r2[4] = py; r2[5] = 1; r2[6] = -qy * px; r2[7] = -qy * py; r2[8] = qy;
    }
    for (int col = 0; col < 8; ++col) {
        int pivot = col;
        for (int row = col + 1; row < 8; ++row)
            if (std::fabs(a[row][col]) > std::fabs(a[pivot][col])) pivot = row;
        for (int c = 0; c < 9; ++c) std::swap(a[col][c], a[pivot][c]);
        REQUIRE(std::fabs(a[col][col]) > 1e-12);
        for (int row = 0; row < 8; ++row) {
            if (row == col) continue;
            const double f = a[row][col] / a[col][col];
            for (int c = col; c < 9; ++c) a[row][c] -= f * a[col][c];
        }
    }
    Homography h;
    for (int i = 0; i < 8; ++i) h.h[static_cast<std::size_t>(i)] = a[i][8] / a[i][i];
    h.h[8] = 1.0;
    return h;
}

Homography oracle_homography(const PoseParams& pose, const CameraModel& cam) {
    const Vec2 p[4] = {{-100, -100}, {100, -100}, {100, 100}, {-80, 90}};
    Vec2 q[4];
    for (int i = 0; i < 4; ++i) q[i] = project_ground(pose, cam, p[i].x, p[i].y);
    return dlt_from_pairs(p, q);
}

CameraModel default_cam() { return CameraModel{}; }

}  // namespace

TEST_CASE("nadir zero pose gives the identity map") {
    const Homography h = pose_to_homography(PoseParams{}, default_cam());
    const Homography id = Homography::identity();
    for (int i = 0; i < 9; ++i) CHECK(h.h[static_cast<std::size_t>(i)] == doctest::Approx(id.h[static_cast<std::size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("north translation is a pure pixel shift of f*gsd/height per meter") {
    PoseParams pose;
    pose.theta_x = 10.0;
    const Homography h = pose_to_homography(pose, default_cam());
    CHECK(h.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(h.at(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
    const double shift = std::hypot(h.at(0, 2), h.at(1, 2));
    CHECK(shift == doctest::Approx(10.0).epsilon(1e-9));  // 10 * f * gsd / height
}

TEST_CASE("doubling the height halves the diagonal scale (DLT oracle)") {
    PoseParams pose;
    pose.theta_y = 1000.0;
    const Homography h = pose_to_homography(pose, default_cam());
    CHECK(h.at(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(h.at(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
    const Homography oracle = oracle_homography(pose, default_cam());
    for (int i = 0; i < 9; ++i)
        CHECK(h.h[static_cast<std::size_t>(i)] == doctest::Approx(oracle.h[static_cast<std::size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("pose_to_homography matches the independent DLT oracle on random poses") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> tr(-120.0, 120.0);
    std::uniform_real_distribution<double> alt(-60.0, 60.0);
    std::uniform_real_distribution<double> ang(-0.2, 0.2);
    const CameraModel cam = default_cam();
    for (int trial = 0; trial < 20; ++trial) {
        PoseParams pose;
        pose.theta_x = tr(rng);
        pose.theta_y = alt(rng);
        pose.theta_z = tr(rng);
        pose.alpha = ang(rng);
        pose.beta = ang(rng);
        pose.gamma = ang(rng);
        const Homography h = pose_to_homography(pose, cam);
        const Homography oracle = oracle_homography(pose, cam);
        for (int i = 0; i < 9; ++i)
            CHECK(h.h[static_cast<std::size_t>(i)] ==
                  doctest::Approx(oracle.h[static_cast<std::size_t>(i)]).epsilon(1e-8).scale(1.0));
    }
}

TEST_CASE("transform_points basic maps") {
    PointSet2D pts;
    pts.points = {{1, 1}};
    SUBCASE("identity") {
        const PointSet2D out = transform_points(pts, Homography::identity());
        CHECK(out.points[0].x == doctest::Approx(1.0));
        CHECK(out.points[0].y == doctest::Approx(1.0));
    }
    SUBCASE("pure translation") {
        Homography h = Homography::identity();
        h.at(0, 2) = 3.0;
        h.at(1, 2) = -4.0;
        const PointSet2D out = transform_points(pts, h);
        CHECK(out.points[0].x == doctest::Approx(4.0));
        CHECK(out.points[0].y == doctest::Approx(-3.0));
    }
    SUBCASE("diagonal scaling") {
        Homography h = Homography::identity();
        h.at(0, 0) = 2.0;
        h.at(1, 1) = 2.0;
        PointSet2D two;
        two.points = {{1, 0}, {0, 1}};
        const PointSet2D out = transform_points(two, h);
        CHECK(out.points[0].x == doctest::Approx(2.0));
        CHECK(out.points[0].y == doctest::Approx(0.0));
        CHECK(out.points[1].x == doctest::Approx(0.0));
        CHECK(out.points[1].y == doctest::Approx(2.0));
    }
}

TEST_CASE("transform_points names the degenerate index") {
    Homography h = Homography::identity();
    h.at(2, 0) = 1.0;
    h.at(2, 2) = -1.0;  // w = x - 1
    PointSet2D pts;
    pts.points = {{0.5, 0}, {1.0, 0}};
    try {
        transform_points(pts, h);
        FAIL("expected a degeneracy error");
    } catch (const GeometryError& e) {
        CHECK(std::string(e.what()).find("index 1") != std::string::npos);
    }
}

TEST_CASE("invert_homography") {
    SUBCASE("identity") {
        const Homography inv = invert_homography(Homography::identity());
        for (int i = 0; i < 9; ++i)
            CHECK(inv.h[static_cast<std::size_t>(i)] == doctest::Approx(Homography::identity().h[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
    SUBCASE("translation inverts to the opposite shift") {
        Homography h = Homography::identity();
        h.at(0, 2) = 3.0;
        h.at(1, 2) = -4.0;
        const Homography inv = invert_homography(h);
        CHECK(inv.at(0, 2) == doctest::Approx(-3.0).epsilon(1e-12));
        CHECK(inv.at(1, 2) == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("random well-conditioned matrices invert within 1e-9") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            Homography h = Homography::identity();
            h.at(0, 0) = 1.0 + 0.3 * d(rng);
            h.at(1, 1) = 1.0 + 0.3 * d(rng);
            h.at(0, 1) = 0.3 * d(rng);
            h.at(1, 0) = 0.3 * d(rng);
            h.at(0, 2) = 10.0 * d(rng);
            h.at(1, 2) = 10.0 * d(rng);
            h.at(2, 0) = 0.001 * d(rng);
            h.at(2, 1) = 0.001 * d(rng);
            const Homography prod = multiply(h, invert_homography(h));
            Homography norm = prod;
            normalize_homography(norm);
            for (int i = 0; i < 9; ++i)
                CHECK(norm.h[static_cast<std::size_t>(i)] ==
                      doctest::Approx(Homography::identity().h[static_cast<std::size_t>(i)]).epsilon(1e-9));
        }
    }
    SUBCASE("singular matrix is rejected") {
        Homography h;
        h.h = {1, 2, 3, 2, 4, 6, 0, 0, 1};  // rank 2
        CHECK_THROWS_AS(invert_homography(h), GeometryError);
    }
}

TEST_CASE("round-trip through pose homography and its inverse returns the points") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> coord(-250.0, 250.0);
    std::uniform_real_distribution<double> tr(-120.0, 120.0);
    std::uniform_real_distribution<double> ang(-0.15, 0.15);
    const CameraModel cam = default_cam();
    for (int trial = 0; trial < 20; ++trial) {
        PoseParams pose;
        pose.theta_x = tr(rng);
        pose.theta_y = tr(rng) / 2.0;
        pose.theta_z = tr(rng);
        pose.alpha = ang(rng);
        pose.beta = ang(rng);
        pose.gamma = ang(rng);
        PointSet2D pts;
        for (int i = 0; i < 30; ++i) pts.points.push_back({coord(rng), coord(rng)});
        const Homography h = pose_to_homography(pose, cam);
        const PointSet2D back = transform_points(transform_points(pts, h), invert_homography(h));
        for (std::size_t i = 0; i < pts.points.size(); ++i) {
            CHECK(back.points[i].x == doctest::Approx(pts.points[i].x).epsilon(1e-6));
            CHECK(back.points[i].y == doctest::Approx(pts.points[i].y).epsilon(1e-6));
        }
    }
}

TEST_CASE("translation linearity at nadir") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> tr(-150.0, 150.0);
    const CameraModel cam = default_cam();
    const double slope = cam.focal_px * cam.reference_gsd / cam.nominal_height;
    PointSet2D probe;
    probe.points = {{37.0, -58.0}};
    const Vec2 base = transform_points(probe, pose_to_homography(PoseParams{}, cam)).points[0];
    for (int trial = 0; trial < 10; ++trial) {
        PoseParams pose;
        pose.theta_x = tr(rng);
        pose.theta_z = tr(rng);
        const Vec2 moved = transform_points(probe, pose_to_homography(pose, cam)).points[0];
        // u carries the east axis (negated), v the north axis.
        CHECK(moved.x - base.x == doctest::Approx(-slope * pose.theta_z).epsilon(1e-6));
        CHECK(moved.y - base.y == doctest::Approx(slope * pose.theta_x).epsilon(1e-6));
    }
}

TEST_CASE("degenerate poses are rejected") {
    const CameraModel cam = default_cam();
    SUBCASE("camera at or below the ground plane") {
        PoseParams pose;
        pose.theta_y = -cam.nominal_height;
        CHECK_THROWS_AS(pose_to_homography(pose, cam), GeometryError);
    }
    SUBCASE("pitch turning the view to the horizon") {
        PoseParams pose;
        pose.beta = M_PI / 2.0;
        CHECK_THROWS_AS(pose_to_homography(pose, cam), GeometryError);
    }
    SUBCASE("non-finite pose parameter") {
        PoseParams pose;
        pose.theta_x = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(pose_to_homography(pose, cam), ConfigError);
    }
}
