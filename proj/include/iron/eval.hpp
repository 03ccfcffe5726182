#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iron/baselines.hpp"
#include "iron/net.hpp"
#include "iron/synth.hpp"

namespace iron {

struct EvalConfig {
    double t_pm = 1.0 / 22.0;  // parameter threshold, normalized grid units
    double t_pt = 2.0;         // point threshold, pixels

    void validate() const;
};

// Fraction of trials whose estimate has every component strictly within t_pm
// of the truth. Inputs are in normalized grid units (offsets / 22).
double param_accuracy(const std::vector<std::array<double, 3>>& estimates,
                      const std::vector<std::array<double, 3>>& truths, double t_pm);

// Root of the mean squared Euclidean deviation over trials (units follow the
// inputs; the benchmark feeds grid-step units).
double param_rmse(const std::vector<std::array<double, 3>>& estimates,
                  const std::vector<std::array<double, 3>>& truths);

// Fraction of correspondence pairs whose residual after transforming the
// u-point with the estimated pose is strictly below t_pt pixels.
double point_accuracy(const PointSet2D& u, const PointSet2D& v,
                      const std::vector<std::pair<int, int>>& correspondences,
                      const PoseParams& estimated_pose, const CameraModel& cam, double t_pt);

// RMS residual over the correspondence pairs, in pixels.
double point_rmse(const PointSet2D& u, const PointSet2D& v,
                  const std::vector<std::pair<int, int>>& correspondences,
                  const PoseParams& estimated_pose, const CameraModel& cam);

enum class Method { anneal, ga, ps, pso, iron };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct TrialRecord {
    int scene = 0;
    int trial = 0;
    Method method = Method::anneal;
    bool failed = false;
    std::string error;
    GridIndex init;
    std::array<double, 3> estimate{};   // meters
    std::array<double, 3> truth{};      // meters
    double param_acc = 0.0;             // 1 when all components within t_pm (normalized units)
    double param_rmse = 0.0;            // Euclidean deviation in grid-step units
    double point_acc = 0.0;
    double point_rmse = 0.0;
    double runtime_seconds = 0.0;
    double evaluation_count = 0.0;      // OptiStep
};

struct MetricStat {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation
};

struct MethodSummary {
    MetricStat param_acc, param_rmse, point_acc, point_rmse, runtime, opti_step;
    int trials = 0;
    int excluded = 0;  // failed trials, not part of the means
};

struct BenchmarkReport {
    std::vector<Method> methods;
    std::map<std::string, MethodSummary> summary;  // keyed by method name
    std::vector<TrialRecord> trials;
    std::map<std::string, std::string> fingerprints;  // config name -> hash
    double tensor_build_seconds = 0.0;  // shared setup, reported separately
    int scene_count = 0;
    int trials_per_scene = 0;
    std::uint64_t seed = 0;
};

struct BenchmarkConfig {
    std::vector<Method> methods{Method::anneal, Method::ga, Method::ps, Method::pso, Method::iron};
    int trials_per_scene = 3;
    std::uint64_t seed = 0;
    bool stub_perfect = false;  // substitute the grid-argmax oracle for the network
    int window_b = 8;
    double label_scale = 22.0;
    EvalConfig eval;
    AnnealConfig anneal;
    GaConfig ga;
    PatternSearchConfig ps;
    PsoConfig pso;
};

// Runs every requested method from a shared random admissible initialization
// per trial; heuristics optimize the continuous objective from the node's
// parameters, the network does its single forward pass on the node's window.
// Per-trial failures are recorded and excluded from the means. Deterministic
// per seed up to the timing fields.
BenchmarkReport run_benchmark(const std::vector<SceneSpec>& scenes, const GridSpec& grid,
                              const CameraModel& cam, const KernelConfig& kcfg,
                              const ObjectiveConfig& ocfg, const BenchmarkConfig& bcfg,
                              const IronModel* model, int n_threads = 1);

// JSON document with the summary table, raw trial records, and config
// fingerprints; summary CSV mirrors the six-metric table layout.
std::string report_to_json(const BenchmarkReport& report);
std::string report_to_csv(const BenchmarkReport& report);

// FNV-1a hash of a canonical config dump, as fixed-width hex.
std::string fingerprint(const std::string& canonical);

}  // namespace iron
