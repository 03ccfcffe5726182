#pragma once

#include <string>
#include <vector>

#include "iron/eval.hpp"
#include "iron/synth.hpp"
#include "iron/trainer.hpp"

namespace iron {

// Scene-suite shape: how many scenes a dataset or benchmark draws and how
// initializations are sampled per scene.
struct SuiteConfig {
    int scenes = 40;
    int centers_per_scene = 50;
    double orbit_step_degrees = 30.0;  // 0 disables the orbit-cluster yaw augmentation

    void validate() const;
};

struct SubTensorConfig {
    int b = 8;
    double label_scale = 22.0;

    void validate() const;
};

// Everything a CLI run needs, mirroring each module's config types. A single
// JSON file populates it; dot-path overrides adjust individual fields.
struct RunConfig {
    std::uint64_t seed = 42;
    int threads = 1;
    std::string output_dir = "out";
    CameraModel camera;
    GridSpec grid;
    KernelConfig kernel{6.0};
    ObjectiveConfig objective;
    SceneSpec scene;  // template; per-scene seed and pose are filled by the suite
    SuiteConfig suite;
    SubTensorConfig subtensor;
    TrainConfig train;
    AnnealConfig anneal;
    GaConfig ga;
    PatternSearchConfig ps;
    PsoConfig pso;
    EvalConfig eval;
    int trials_per_scene = 3;
    std::vector<Method> methods{Method::anneal, Method::ga, Method::ps, Method::pso, Method::iron};

    void validate() const;

    // Canonical dump used for fingerprinting; stable field order.
    std::string canonical() const;
};

// Loads defaults, merges the optional JSON file, then applies "key=value"
// dot-path overrides (e.g. "kernel.sigma=4"). Throws ConfigError naming the
// offending field. Validation happens before this returns.
RunConfig load_config(const std::string& path_or_empty, const std::vector<std::string>& overrides);

// Builds the scene specs of a suite: per-scene seeds derive from the master
// seed (seed + index), true poses land on uniformly drawn grid nodes, and
// when orbit_step_degrees > 0 the yaw cycles through the orbit cluster.
std::vector<SceneSpec> make_suite(const RunConfig& cfg, std::uint64_t suite_salt, int scenes,
                                  bool noiseless = false);

}  // namespace iron
