#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iron/landscape.hpp"

namespace iron {

// Knobs for one synthetic registration scene. The true pose is constrained
// to a grid node so the tensor argmax is an exact ground truth. Feature
// points cluster around uniformly placed centers the way detector keypoints
// concentrate on salient structures; clusters = 0 scatters them uniformly.
struct SceneSpec {
    int n_points = 200;
    PoseParams true_pose;
    double noise_sigma = 1.0;      // px, isotropic, in sensed coordinates
    double outlier_fraction = 0.1;
    double field_extent = 512.0;   // px, reference points fill the centered square
    int clusters = 8;
    double cluster_std_px = 30.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticScene {
    PointSet2D u;  // sensed
    PointSet2D v;  // reference
    PoseParams true_pose;
    std::vector<std::pair<int, int>> correspondences;  // true inlier index pairs
};

// Samples the reference set uniformly over the centered field square, warps
// inliers into the sensed frame through the inverse true-pose homography,
// adds Gaussian noise there, and replaces the trailing outlier fraction with
// uniform random points. Deterministic per seed.
SyntheticScene generate_scene(const SceneSpec& spec, const CameraModel& cam);

// Base pose with its yaw incremented by k*step for k = 0 .. 360/step - 1.
// step must divide 360.
std::vector<PoseParams> orbit_cluster(const PoseParams& base_pose, double step_degrees);

struct SceneRecord {
    SceneSpec spec;
    GridIndex true_node;
    GridIndex argmax_node;
    int first_sample = 0;  // index of this scene's first sample in the dataset
    int sample_count = 0;
};

struct DatasetManifest {
    std::vector<SceneRecord> scenes;
    std::uint64_t master_seed = 0;
    int centers_per_scene = 0;
    double label_scale = 22.0;
    std::array<double, 3> label_mean{};
    std::array<double, 3> label_min{};
    std::array<double, 3> label_max{};
};

struct Dataset {
    std::vector<TrainingSample> samples;
    DatasetManifest manifest;
};

// Builds the full similarity tensor per scene, locates its argmax, samples
// admissible window centers uniformly without replacement, and emits
// (sub-tensor, normalized offset) pairs. Noiseless outlier-free scenes are
// verified to place the argmax exactly at the true node.
Dataset build_dataset(const std::vector<SceneSpec>& scenes, int centers_per_scene,
                      const GridSpec& grid, const CameraModel& cam, const KernelConfig& kcfg,
                      const ObjectiveConfig& ocfg, int window_b = 8, double label_scale = 22.0,
                      std::uint64_t master_seed = 0, int n_threads = 1);

// Grid node of a pose that is expected to sit exactly on the grid; throws if
// it does not (within a small matching tolerance).
GridIndex pose_grid_node(const PoseParams& pose, const GridSpec& grid);

// Derives the per-scene seed from the master seed by the documented rule
// (master + index).
std::uint64_t scene_seed(std::uint64_t master_seed, int scene_index);

}  // namespace iron
