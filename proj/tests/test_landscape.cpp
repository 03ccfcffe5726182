#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "iron/landscape.hpp"

using namespace iron;

namespace {

PointSet2D random_set(std::mt19937_64& rng, int n, double extent) {
    std::uniform_real_distribution<double> d(-extent, extent);
    PointSet2D out;
    for (int i = 0; i < n; ++i) out.points.push_back({d(rng), d(rng)});
    return out;
}

GridIndex brute_force_argmax(const SimilarityTensor& t) {
    const int s = t.grid.nodes_per_axis;
    GridIndex best{0, 0, 0};
    double best_v = -1e300;
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j)
            for (int k = 0; k < s; ++k)
                if (t.at(i, j, k) > best_v) {
                    best_v = t.at(i, j, k);
                    best = GridIndex{i, j, k};
                }
    return best;
}

}  // namespace

TEST_CASE("toy 2-node grid values equal hand-composed objective calls") {
    GridSpec grid;
    grid.nodes_per_axis = 2;
    grid.x = {-10.0, 10.0};
    grid.y = {-5.0, 5.0};
    grid.z = {-10.0, 10.0};
    CameraModel cam;
    KernelConfig kcfg{2.0};
    ObjectiveConfig ocfg;
    PointSet2D u, v;
    u.points = {{3.0, -2.0}};
    v.points = {{1.0, 4.0}};
    const SimilarityTensor t = build_similarity_tensor(u, v, {0, 0, 0}, grid, cam, kcfg, ocfg);
    REQUIRE(t.values.size() == 8);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                PoseParams pose;
                pose.theta_x = grid.value_x(i);
                pose.theta_y = grid.value_y(j);
                pose.theta_z = grid.value_z(k);
                CHECK(t.at(i, j, k) == doctest::Approx(objective(u, v, pose, cam, kcfg, ocfg)).epsilon(1e-15));
            }
}

TEST_CASE("self-scene with symmetric grid peaks at the center node") {
    GridSpec grid;  // defaults are symmetric about zero
    CameraModel cam;
    KernelConfig kcfg{4.0};
    ObjectiveConfig ocfg;
    std::mt19937_64 rng(2024);
    const PointSet2D v = random_set(rng, 40, 200.0);
    const SimilarityTensor t = build_similarity_tensor(v, v, {0, 0, 0}, grid, cam, kcfg, ocfg, 2);
    const GridIndex center{15, 15, 15};
    const double center_value = t.at(center.i, center.j, center.k);
    const GridIndex best = argmax_tensor(t);
    CHECK(center_value >= t.at(best.i, best.j, best.k) - 1e-15);
    CHECK(best == center);
}

TEST_CASE("stored values match independent objective calls at random nodes") {
    GridSpec grid;
    CameraModel cam;
    KernelConfig kcfg{6.0};
    ObjectiveConfig ocfg;
    std::mt19937_64 rng(9);
    const PointSet2D u = random_set(rng, 15, 150.0);
    const PointSet2D v = random_set(rng, 17, 150.0);
    const std::array<double, 3> angles{0.1, -0.02, 0.03};
    const SimilarityTensor t = build_similarity_tensor(u, v, angles, grid, cam, kcfg, ocfg, 2);
    std::uniform_int_distribution<int> node(0, grid.nodes_per_axis - 1);
    for (int check = 0; check < 50; ++check) {
        const int i = node(rng), j = node(rng), k = node(rng);
        PoseParams pose;
        pose.theta_x = grid.value_x(i);
        pose.theta_y = grid.value_y(j);
        pose.theta_z = grid.value_z(k);
        pose.alpha = angles[0];
        pose.beta = angles[1];
        pose.gamma = angles[2];
        CHECK(std::fabs(t.at(i, j, k) - objective(u, v, pose, cam, kcfg, ocfg)) < 1e-12);
    }
}

TEST_CASE("tensor construction is deterministic and thread-count independent") {
    GridSpec grid;
    grid.nodes_per_axis = 9;
    CameraModel cam;
    KernelConfig kcfg{3.0};
    ObjectiveConfig ocfg;
    std::mt19937_64 rng(77);
    const PointSet2D u = random_set(rng, 10, 100.0);
    const PointSet2D v = random_set(rng, 12, 100.0);
    const SimilarityTensor a = build_similarity_tensor(u, v, {0, 0, 0}, grid, cam, kcfg, ocfg, 1);
    const SimilarityTensor b = build_similarity_tensor(u, v, {0, 0, 0}, grid, cam, kcfg, ocfg, 1);
    const SimilarityTensor c = build_similarity_tensor(u, v, {0, 0, 0}, grid, cam, kcfg, ocfg, 4);
    CHECK(a.values == b.values);
    CHECK(a.values == c.values);
}

TEST_CASE("argmax_tensor") {
    GridSpec grid;
    const int s = grid.nodes_per_axis;
    SimilarityTensor t;
    t.grid = grid;
    t.values.assign(static_cast<std::size_t>(s) * s * s, 0.0);

    SUBCASE("unique peak") {
        t.at(3, 7, 11) = 1.0;
        CHECK(argmax_tensor(t) == GridIndex{3, 7, 11});
    }
    SUBCASE("constant tensor breaks ties lexicographically") {
        std::fill(t.values.begin(), t.values.end(), 0.25);
        CHECK(argmax_tensor(t) == GridIndex{0, 0, 0});
    }
    SUBCASE("two equal peaks pick the lexicographically smaller index") {
        t.at(5, 9, 2) = 2.0;
        t.at(5, 9, 14) = 2.0;
        CHECK(argmax_tensor(t) == GridIndex{5, 9, 2});
    }
    SUBCASE("random tensors match the exhaustive scan") {
        std::mt19937_64 rng(123);
        std::uniform_real_distribution<double> d(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            for (double& v : t.values) v = d(rng);
            CHECK(argmax_tensor(t) == brute_force_argmax(t));
        }
    }
}

TEST_CASE("extract_subtensor windows and bounds") {
    GridSpec grid;
    const int s = grid.nodes_per_axis;
    SimilarityTensor t;
    t.grid = grid;
    t.values.resize(static_cast<std::size_t>(s) * s * s);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (double& v : t.values) v = d(rng);

    SUBCASE("centered window covers center +- 4 per axis") {
        const SubTensor sub = extract_subtensor(t, {15, 15, 15}, 8);
        CHECK(sub.edge == 9);
        for (int l = 0; l < 9; ++l)
            for (int m = 0; m < 9; ++m)
                for (int n = 0; n < 9; ++n)
                    CHECK(sub.at(l, m, n) == t.at(11 + l, 11 + m, 11 + n));  // bit-for-bit
    }
    SUBCASE("minimal valid center touches the boundary") {
        const SubTensor sub = extract_subtensor(t, {4, 4, 4}, 8);
        CHECK(sub.at(0, 0, 0) == t.at(0, 0, 0));
        CHECK(sub.at(8, 8, 8) == t.at(8, 8, 8));
    }
    SUBCASE("out-of-bounds center names the axis") {
        try {
            extract_subtensor(t, {3, 15, 15}, 8);
            FAIL("expected a bounds error");
        } catch (const BoundsError& e) {
            CHECK(std::string(e.what()).find("axis x") != std::string::npos);
        }
        CHECK_THROWS_AS(extract_subtensor(t, {15, 27, 15}, 8), BoundsError);
        CHECK_THROWS_AS(extract_subtensor(t, {15, 15, 255}, 8), BoundsError);
    }
    SUBCASE("exactly 23^3 centers are admissible for S=31, b=8") {
        long accepted = 0;
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j)
                for (int k = 0; k < s; ++k) {
                    try {
                        extract_subtensor(t, {i, j, k}, 8);
                        ++accepted;
                    } catch (const BoundsError&) {
                    }
                }
        CHECK(accepted == 23L * 23L * 23L);
    }
}

TEST_CASE("make_label") {
    CHECK(make_label({5, 5, 5}, {5, 5, 5}) == std::array<double, 3>{0.0, 0.0, 0.0});
    // center at the low admissible corner, optimum at the high one: 22 steps.
    const auto unit = make_label({4, 4, 4}, {26, 4, 4});
    CHECK(unit[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(unit[1] == 0.0);
    CHECK(unit[2] == 0.0);
    const auto mixed = make_label({15, 13, 14}, {11, 19, 14});
    CHECK(mixed[0] == doctest::Approx(-4.0 / 22.0).epsilon(1e-15));
    CHECK(mixed[1] == doctest::Approx(6.0 / 22.0).epsilon(1e-15));
    CHECK(mixed[2] == 0.0);
    // labels are not clipped: 26 steps exceeds magnitude 1
    const auto big = make_label({4, 4, 4}, {30, 4, 4});
    CHECK(big[0] == doctest::Approx(26.0 / 22.0).epsilon(1e-15));
}

TEST_CASE("denormalize_offset maps normalized predictions to meters") {
    GridSpec grid;  // steps: x 10, y 5, z 10
    CHECK(denormalize_offset({0, 0, 0}, 22.0, grid) == std::array<double, 3>{0.0, 0.0, 0.0});
    const auto full = denormalize_offset({1.0, 0, 0}, 22.0, grid);
    CHECK(full[0] == doctest::Approx(220.0).epsilon(1e-12));

    SUBCASE("round-trips the metric offset between random node pairs") {
        std::mt19937_64 rng(31);
        std::uniform_int_distribution<int> node(0, grid.nodes_per_axis - 1);
        for (int trial = 0; trial < 100; ++trial) {
            const GridIndex c{node(rng), node(rng), node(rng)};
            const GridIndex o{node(rng), node(rng), node(rng)};
            const auto metric = denormalize_offset(make_label(c, o, 22.0), 22.0, grid);
            CHECK(metric[0] == doctest::Approx((o.i - c.i) * grid.step_x()).epsilon(1e-9));
            CHECK(metric[1] == doctest::Approx((o.j - c.j) * grid.step_y()).epsilon(1e-9));
            CHECK(metric[2] == doctest::Approx((o.k - c.k) * grid.step_z()).epsilon(1e-9));
        }
    }
}

TEST_CASE("label round(label*22) recovers the argmax from any admissible center") {
    GridSpec grid;
    std::mt19937_64 rng(55);
    std::uniform_int_distribution<int> node(0, grid.nodes_per_axis - 1);
    std::uniform_int_distribution<int> adm(4, 26);
    for (int trial = 0; trial < 200; ++trial) {
        const GridIndex opt{node(rng), node(rng), node(rng)};
        const GridIndex center{adm(rng), adm(rng), adm(rng)};
        const auto label = make_label(center, opt, 22.0);
        // float storage must still round back exactly
        const float f[3] = {static_cast<float>(label[0]), static_cast<float>(label[1]),
                            static_cast<float>(label[2])};
        CHECK(center.i + std::lround(f[0] * 22.0) == opt.i);
        CHECK(center.j + std::lround(f[1] * 22.0) == opt.j);
        CHECK(center.k + std::lround(f[2] * 22.0) == opt.k);
    }
}

TEST_CASE("grid validation") {
    GridSpec grid;
    grid.nodes_per_axis = 1;
    CHECK_THROWS_AS(grid.validate(), ConfigError);
    grid.nodes_per_axis = 31;
    grid.x = {10.0, -10.0};
    CHECK_THROWS_AS(grid.validate(), ConfigError);
}
