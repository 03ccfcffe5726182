#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>

#include "iron/landscape.hpp"

namespace iron {

// Continuous box over the three translation parameters (meters).
struct SearchBox {
    AxisRange x;
    AxisRange y;
    AxisRange z;

    static SearchBox from_grid(const GridSpec& grid) { return SearchBox{grid.x, grid.y, grid.z}; }

    void validate() const;
    double extent(int axis) const;
    double lo(int axis) const;
    double hi(int axis) const;
    std::array<double, 3> center() const;
    std::array<double, 3> clamp(const std::array<double, 3>& p) const;
    bool contains(const std::array<double, 3>& p, double tol = 1e-9) const;
};

// Score function to MAXIMIZE over the box.
using ScoreFn = std::function<double(const std::array<double, 3>&)>;

struct OptResult {
    std::array<double, 3> best_params{};
    double best_score = 0.0;
    long evaluation_count = 0;  // exact number of score_fn invocations (OptiStep)
    double runtime_seconds = 0.0;
};

struct AnnealConfig {
    double initial_temperature = 1.0;
    double cooling_rate = 0.95;      // T_{k+1} = cooling_rate * T_k, applied per iteration
    double proposal_scale = 0.10;    // initial proposal std as a fraction of each axis extent
    int max_iterations = 4000;
    std::uint64_t seed = 1;
    std::optional<std::array<double, 3>> start;

    void validate() const;
};

struct GaConfig {
    int population = 80;
    int generations = 100;
    double crossover_rate = 0.9;
    double mutation_rate = 0.15;
    int elite_count = 2;
    int tournament_size = 3;
    double mutation_scale = 0.10;    // initial mutation std as a fraction of each axis extent
    double mutation_decay = 0.93;    // per-generation geometric decay of the mutation std
    std::uint64_t seed = 1;
    std::optional<std::array<double, 3>> start;

    void validate() const;
};

struct PatternSearchConfig {
    double initial_mesh = 0.0;       // meters; 0 selects 10% of the largest axis extent
    double expansion = 2.0;
    double contraction = 0.5;
    double mesh_tolerance = 1e-3;    // meters
    long max_evaluations = 1000000;
    std::optional<std::array<double, 3>> start;

    void validate() const;
};

struct PsoConfig {
    int swarm_size = 60;
    int iterations = 100;
    double inertia = 0.729;
    double cognitive = 1.49445;
    double social = 1.49445;
    std::uint64_t seed = 1;
    std::optional<std::array<double, 3>> start;

    void validate() const;
};

// All four return the best point seen, its score, the exact evaluation count
// and wall time. Proposals are clamped to the box; a non-finite score aborts
// with an error naming the offending point. Deterministic per seed (pattern
// search is deterministic given its start point).
OptResult simulated_annealing(const ScoreFn& score_fn, const SearchBox& box, const AnnealConfig& cfg);
OptResult genetic_algorithm(const ScoreFn& score_fn, const SearchBox& box, const GaConfig& cfg);
OptResult pattern_search(const ScoreFn& score_fn, const SearchBox& box, const PatternSearchConfig& cfg);
OptResult particle_swarm(const ScoreFn& score_fn, const SearchBox& box, const PsoConfig& cfg);

}  // namespace iron
