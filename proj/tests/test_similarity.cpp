#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "iron/similarity.hpp"

using namespace iron;

namespace {

// Brute-force reference: plain double loop written independently of the
// library path (no underflow cutoff, reversed iteration order).
double kernel_reference(const PointSet2D& a, const PointSet2D& b, double sigma) {
    double sum = 0.0;
    for (std::size_t j = b.points.size(); j-- > 0;) {
        for (std::size_t i = a.points.size(); i-- > 0;) {
            const double dx = a.points[i].x - b.points[j].x;
            const double dy = a.points[i].y - b.points[j].y;
            sum += std::exp(-(dx * dx + dy * dy) / (4.0 * sigma * sigma));
        }
    }
    return sum / (static_cast<double>(a.points.size()) * static_cast<double>(b.points.size()));
}

PointSet2D random_set(std::mt19937_64& rng, int n, double extent) {
    std::uniform_real_distribution<double> d(-extent, extent);
    PointSet2D out;
    for (int i = 0; i < n; ++i) out.points.push_back({d(rng), d(rng)});
    return out;
}

}  // namespace

TEST_CASE("identical singletons give exactly 1") {
    PointSet2D a;
    a.points = {{0, 0}};
    for (double sigma : {0.5, 2.0, 17.0})
        CHECK(kernel_correlation(a, a, KernelConfig{sigma}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("singletons at distance 2*sigma give exp(-1)") {
    const double sigma = 2.0;
    PointSet2D a, b;
    a.points = {{0, 0}};
    b.points = {{2.0 * sigma, 0}};
    CHECK(kernel_correlation(a, b, KernelConfig{sigma}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("two-against-one matches the hand-computed pairwise sum") {
    PointSet2D a, b;
    a.points = {{0, 0}, {1, 0}};
    b.points = {{0, 0}};
    const double expected = 0.5 * (1.0 + std::exp(-0.25));  // 0.889400...
    CHECK(kernel_correlation(a, b, KernelConfig{1.0}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(kernel_correlation(a, b, KernelConfig{1.0}) == doctest::Approx(0.8894003915).epsilon(1e-9));
}

TEST_CASE("symmetry and joint-translation invariance over random pairs") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    for (int trial = 0; trial < 100; ++trial) {
        PointSet2D a = random_set(rng, 1 + trial % 17, 30.0);
        PointSet2D b = random_set(rng, 1 + (trial * 7) % 23, 30.0);
        const KernelConfig cfg{1.0 + 0.3 * (trial % 5)};
        const double ab = kernel_correlation(a, b, cfg);
        const double ba = kernel_correlation(b, a, cfg);
        CHECK(std::fabs(ab - ba) < 1e-12);
        const double dx = shift(rng), dy = shift(rng);
        PointSet2D a2 = a, b2 = b;
        for (Vec2& p : a2.points) { p.x += dx; p.y += dy; }
        for (Vec2& p : b2.points) { p.x += dx; p.y += dy; }
        CHECK(std::fabs(kernel_correlation(a2, b2, cfg) - ab) < 1e-12);
    }
}

TEST_CASE("matches the brute-force reference on random pairs") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        PointSet2D a = random_set(rng, 5 + trial % 20, 40.0);
        PointSet2D b = random_set(rng, 3 + trial % 15, 40.0);
        const KernelConfig cfg{2.0};
        CHECK(kernel_correlation(a, b, cfg) == doctest::Approx(kernel_reference(a, b, 2.0)).epsilon(1e-12));
    }
}

TEST_CASE("monotone decay for singleton sets") {
    PointSet2D a;
    a.points = {{0, 0}};
    const KernelConfig cfg{2.0};
    double prev = 2.0;
    for (double d = 0.0; d < 20.0; d += 0.5) {
        PointSet2D b;
        b.points = {{d, 0}};
        const double s = kernel_correlation(a, b, cfg);
        CHECK(s < prev);
        CHECK(s > 0.0);
        prev = s;
    }
}

TEST_CASE("empty sets are rejected") {
    PointSet2D a, b;
    a.points = {{0, 0}};
    CHECK_THROWS_AS(kernel_correlation(a, b, KernelConfig{1.0}), ConfigError);
    CHECK_THROWS_AS(kernel_correlation(b, a, KernelConfig{1.0}), ConfigError);
}

TEST_CASE("invalid sigma is rejected") {
    PointSet2D a;
    a.points = {{0, 0}};
    CHECK_THROWS_AS(kernel_correlation(a, a, KernelConfig{0.0}), ConfigError);
    CHECK_THROWS_AS(kernel_correlation(a, a, KernelConfig{-1.0}), ConfigError);
}

TEST_CASE("objective composes transform and correlation") {
    const CameraModel cam;
    const KernelConfig kcfg{2.0};
    ObjectiveConfig ocfg;

    SUBCASE("identity pose on identical sets reaches the self-correlation") {
        std::mt19937_64 rng(3);
        const PointSet2D v = random_set(rng, 25, 100.0);
        const double self = kernel_correlation(v, v, kcfg);
        CHECK(objective(v, v, PoseParams{}, cam, kcfg, ocfg) == doctest::Approx(self).epsilon(1e-12));
    }

    SUBCASE("with lambda = 0 the score equals the transformed correlation exactly") {
        std::mt19937_64 rng(4);
        const PointSet2D u = random_set(rng, 12, 80.0);
        const PointSet2D v = random_set(rng, 14, 80.0);
        PoseParams pose;
        pose.theta_x = 30.0;
        pose.theta_y = -20.0;
        pose.theta_z = 12.0;
        const double direct =
            kernel_correlation(transform_points(u, pose_to_homography(pose, cam)), v, kcfg);
        CHECK(objective(u, v, pose, cam, kcfg, ocfg) == doctest::Approx(direct).epsilon(1e-15));
    }

    SUBCASE("pose shifting a singleton by 2 sigma gives exp(-1)") {
        PointSet2D p;
        p.points = {{0, 0}};
        // theta_x moves the sensed point by +f*gsd/h px along v.
        PoseParams pose;
        pose.theta_x = 2.0 * kcfg.sigma * cam.nominal_height / (cam.focal_px * cam.reference_gsd);
        CHECK(objective(p, p, pose, cam, kcfg, ocfg) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    }

    SUBCASE("regularizer subtracts the normalized squared translation") {
        PointSet2D p;
        p.points = {{0, 0}};
        ObjectiveConfig reg;
        reg.lambda = 0.5;
        reg.regularizer = Regularizer::squared_translation_norm;
        reg.scale_norm_x = 150.0;
        reg.scale_norm_y = 75.0;
        reg.scale_norm_z = 150.0;
        PoseParams pose;
        pose.theta_x = 15.0;
        pose.theta_y = 7.5;
        pose.theta_z = -30.0;
        const double base = objective(p, p, pose, cam, kcfg, ObjectiveConfig{});
        const double expected =
            base - 0.5 * (std::pow(15.0 / 150.0, 2) + std::pow(7.5 / 75.0, 2) + std::pow(-30.0 / 150.0, 2));
        CHECK(objective(p, p, pose, cam, kcfg, reg) == doctest::Approx(expected).epsilon(1e-12));
    }
}
