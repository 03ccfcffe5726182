#include "iron/synth.hpp"

#include <cmath>
#include <random>

namespace iron {

void SceneSpec::validate() const {
    if (n_points < 4) throw ConfigError("scene n_points must be >= 4");
    if (!(noise_sigma >= 0.0)) throw ConfigError("scene noise_sigma must be >= 0");
    if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0))
        throw ConfigError("scene outlier_fraction must lie in [0, 1)");
    if (!(field_extent > 0.0)) throw ConfigError("scene field_extent must be > 0");
    if (clusters < 0) throw ConfigError("scene clusters must be >= 0");
    if (clusters > 0 && !(cluster_std_px > 0.0)) throw ConfigError("scene cluster_std_px must be > 0");
    true_pose.validate();
}

SyntheticScene generate_scene(const SceneSpec& spec, const CameraModel& cam) {
    spec.validate();
    cam.validate();

    std::mt19937_64 rng(spec.seed);
    const double half = spec.field_extent / 2.0;
    std::uniform_real_distribution<double> field(-half, half);

    SyntheticScene scene;
    scene.true_pose = spec.true_pose;
    scene.v.points.resize(static_cast<std::size_t>(spec.n_points));
    if (spec.clusters > 0) {
        std::vector<Vec2> centers(static_cast<std::size_t>(spec.clusters));
        for (Vec2& c : centers) {
            c.x = field(rng);
            c.y = field(rng);
        }
        std::uniform_int_distribution<int> pick(0, spec.clusters - 1);
        std::normal_distribution<double> spread(0.0, spec.cluster_std_px);
        for (Vec2& p : scene.v.points) {
            const Vec2& c = centers[static_cast<std::size_t>(pick(rng))];
            p.x = c.x + spread(rng);
            p.y = c.y + spread(rng);
        }
    } else {
        for (Vec2& p : scene.v.points) {
            p.x = field(rng);
            p.y = field(rng);
        }
    }

    const Homography inverse_true = invert_homography(pose_to_homography(spec.true_pose, cam));
    scene.u = transform_points(scene.v, inverse_true);

    if (spec.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (Vec2& p : scene.u.points) {
            p.x += noise(rng);
            p.y += noise(rng);
        }
    }

    const int n_corr = static_cast<int>(std::llround(spec.n_points * (1.0 - spec.outlier_fraction)));
    for (int i = n_corr; i < spec.n_points; ++i) {
        scene.u.points[static_cast<std::size_t>(i)].x = field(rng);
        scene.u.points[static_cast<std::size_t>(i)].y = field(rng);
    }
    scene.correspondences.reserve(static_cast<std::size_t>(n_corr));
    for (int i = 0; i < n_corr; ++i) scene.correspondences.emplace_back(i, i);
    return scene;
}

std::vector<PoseParams> orbit_cluster(const PoseParams& base_pose, double step_degrees) {
    if (!(step_degrees > 0.0)) throw ConfigError("orbit step must be > 0 degrees");
    const double count_f = 360.0 / step_degrees;
    const long count = std::lround(count_f);
    if (count < 1 || std::fabs(count_f - static_cast<double>(count)) > 1e-9)
        throw ConfigError("orbit step of " + std::to_string(step_degrees) + " degrees does not divide 360");
    std::vector<PoseParams> orbit;
    orbit.reserve(static_cast<std::size_t>(count));
    const double step_rad = step_degrees * M_PI / 180.0;
    for (long k = 0; k < count; ++k) {
        PoseParams p = base_pose;
        p.alpha = base_pose.alpha + static_cast<double>(k) * step_rad;
        orbit.push_back(p);
    }
    return orbit;
}

GridIndex pose_grid_node(const PoseParams& pose, const GridSpec& grid) {
    grid.validate();
    const double fi = (pose.theta_x - grid.x.min) / grid.step_x();
    const double fj = (pose.theta_y - grid.y.min) / grid.step_y();
    const double fk = (pose.theta_z - grid.z.min) / grid.step_z();
    const GridIndex node{static_cast<int>(std::lround(fi)), static_cast<int>(std::lround(fj)),
                         static_cast<int>(std::lround(fk))};
    const double tol = 1e-6;
    if (std::fabs(fi - node.i) > tol || std::fabs(fj - node.j) > tol || std::fabs(fk - node.k) > tol)
        throw ConfigError("pose does not sit on a grid node");
    const int s = grid.nodes_per_axis;
    if (node.i < 0 || node.i >= s || node.j < 0 || node.j >= s || node.k < 0 || node.k >= s)
        throw ConfigError("pose grid node lies outside the grid");
    return node;
}

std::uint64_t scene_seed(std::uint64_t master_seed, int scene_index) {
    return master_seed + static_cast<std::uint64_t>(scene_index);
}

Dataset build_dataset(const std::vector<SceneSpec>& scenes, int centers_per_scene,
                      const GridSpec& grid, const CameraModel& cam, const KernelConfig& kcfg,
                      const ObjectiveConfig& ocfg, int window_b, double label_scale,
                      std::uint64_t master_seed, int n_threads) {
    if (scenes.empty()) throw ConfigError("dataset needs at least one scene");
    if (centers_per_scene < 1) throw ConfigError("centers_per_scene must be >= 1");
    grid.validate();
    const int s = grid.nodes_per_axis;
    const int half = window_b / 2;
    const int per_axis = s - window_b;
    if (per_axis < 1) throw ConfigError("grid too small for the sub-tensor window");
    const long n_admissible = static_cast<long>(per_axis) * per_axis * per_axis;
    if (centers_per_scene > n_admissible)
        throw ConfigError("centers_per_scene exceeds the number of admissible centers (" +
                          std::to_string(n_admissible) + ")");

    Dataset ds;
    ds.manifest.master_seed = master_seed;
    ds.manifest.centers_per_scene = centers_per_scene;
    ds.manifest.label_scale = label_scale;

    std::array<double, 3> sum{0, 0, 0};
    std::array<double, 3> lo{1e300, 1e300, 1e300};
    std::array<double, 3> hi{-1e300, -1e300, -1e300};

    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const SceneSpec& spec = scenes[si];
        const GridIndex true_node = pose_grid_node(spec.true_pose, grid);
        const SyntheticScene scene = generate_scene(spec, cam);
        const std::array<double, 3> angles{spec.true_pose.alpha, spec.true_pose.beta, spec.true_pose.gamma};
        const SimilarityTensor tensor =
            build_similarity_tensor(scene.u, scene.v, angles, grid, cam, kcfg, ocfg, n_threads,
                                    "scene seed " + std::to_string(spec.seed));
        const GridIndex opt = argmax_tensor(tensor);
        if (spec.noise_sigma == 0.0 && spec.outlier_fraction == 0.0 && !(opt == true_node))
            throw NumericError("scene generation error: noiseless scene argmax (" + std::to_string(opt.i) +
                               "," + std::to_string(opt.j) + "," + std::to_string(opt.k) +
                               ") differs from the true node (" + std::to_string(true_node.i) + "," +
                               std::to_string(true_node.j) + "," + std::to_string(true_node.k) + ")");

        // Admissible centers, sampled without replacement by partial
        // Fisher-Yates with a per-scene generator.
        std::vector<long> candidates(static_cast<std::size_t>(n_admissible));
        for (long c = 0; c < n_admissible; ++c) candidates[static_cast<std::size_t>(c)] = c;
        std::mt19937_64 center_rng(spec.seed ^ 0xC3A5C85C97CB3127ULL);
        SceneRecord record;
        record.spec = spec;
        record.true_node = true_node;
        record.argmax_node = opt;
        record.first_sample = static_cast<int>(ds.samples.size());
        record.sample_count = centers_per_scene;
        for (int c = 0; c < centers_per_scene; ++c) {
            std::uniform_int_distribution<long> pick(c, n_admissible - 1);
            std::swap(candidates[static_cast<std::size_t>(c)], candidates[static_cast<std::size_t>(pick(center_rng))]);
            const long flat = candidates[static_cast<std::size_t>(c)];
            const GridIndex center{half + static_cast<int>(flat / (per_axis * per_axis)),
                                   half + static_cast<int>((flat / per_axis) % per_axis),
                                   half + static_cast<int>(flat % per_axis)};
            const SubTensor sub = extract_subtensor(tensor, center, window_b);
            const std::array<double, 3> label = make_label(center, opt, label_scale);
            TrainingSample sample;
            sample.center = center;
            sample.input.resize(sub.values.size());
            for (std::size_t i = 0; i < sub.values.size(); ++i)
                sample.input[i] = static_cast<float>(sub.values[i]);
            for (int a = 0; a < 3; ++a) {
                sample.label[static_cast<std::size_t>(a)] = static_cast<float>(label[static_cast<std::size_t>(a)]);
                sum[static_cast<std::size_t>(a)] += label[static_cast<std::size_t>(a)];
                lo[static_cast<std::size_t>(a)] = std::min(lo[static_cast<std::size_t>(a)], label[static_cast<std::size_t>(a)]);
                hi[static_cast<std::size_t>(a)] = std::max(hi[static_cast<std::size_t>(a)], label[static_cast<std::size_t>(a)]);
            }
            ds.samples.push_back(std::move(sample));
        }
        ds.manifest.scenes.push_back(std::move(record));
    }
    const double inv_n = 1.0 / static_cast<double>(ds.samples.size());
    for (int a = 0; a < 3; ++a) {
        ds.manifest.label_mean[static_cast<std::size_t>(a)] = sum[static_cast<std::size_t>(a)] * inv_n;
        ds.manifest.label_min[static_cast<std::size_t>(a)] = lo[static_cast<std::size_t>(a)];
        ds.manifest.label_max[static_cast<std::size_t>(a)] = hi[static_cast<std::size_t>(a)];
    }
    return ds;
}

}  // namespace iron
