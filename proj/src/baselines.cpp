#include "iron/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

namespace iron {

void SearchBox::validate() const {
    const AxisRange* axes[3] = {&x, &y, &z};
    for (const AxisRange* a : axes)
        if (!std::isfinite(a->min) || !std::isfinite(a->max) || !(a->max > a->min))
            throw ConfigError("search box axes must satisfy max > min with finite bounds");
}

double SearchBox::extent(int axis) const { return hi(axis) - lo(axis); }

double SearchBox::lo(int axis) const { return axis == 0 ? x.min : axis == 1 ? y.min : z.min; }

double SearchBox::hi(int axis) const { return axis == 0 ? x.max : axis == 1 ? y.max : z.max; }

std::array<double, 3> SearchBox::center() const {
    return {(x.min + x.max) / 2.0, (y.min + y.max) / 2.0, (z.min + z.max) / 2.0};
}

std::array<double, 3> SearchBox::clamp(const std::array<double, 3>& p) const {
    std::array<double, 3> q = p;
    for (int a = 0; a < 3; ++a) q[static_cast<std::size_t>(a)] = std::clamp(q[static_cast<std::size_t>(a)], lo(a), hi(a));
    return q;
}

bool SearchBox::contains(const std::array<double, 3>& p, double tol) const {
    for (int a = 0; a < 3; ++a)
        if (p[static_cast<std::size_t>(a)] < lo(a) - tol || p[static_cast<std::size_t>(a)] > hi(a) + tol) return false;
    return true;
}

void AnnealConfig::validate() const {
    if (!(initial_temperature > 0.0)) throw ConfigError("anneal initial_temperature must be > 0");
    if (!(cooling_rate > 0.0 && cooling_rate < 1.0)) throw ConfigError("anneal cooling_rate must lie in (0, 1)");
    if (!(proposal_scale > 0.0)) throw ConfigError("anneal proposal_scale must be > 0");
    if (max_iterations < 1) throw ConfigError("anneal max_iterations must be >= 1");
}

void GaConfig::validate() const {
    if (population < 2) throw ConfigError("ga population must be >= 2");
    if (generations < 1) throw ConfigError("ga generations must be >= 1");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ConfigError("ga crossover_rate must lie in [0, 1]");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("ga mutation_rate must lie in [0, 1]");
    if (elite_count < 0 || elite_count >= population) throw ConfigError("ga elite_count must lie in [0, population)");
    if (tournament_size < 1) throw ConfigError("ga tournament_size must be >= 1");
    if (!(mutation_scale > 0.0)) throw ConfigError("ga mutation_scale must be > 0");
    if (!(mutation_decay > 0.0 && mutation_decay <= 1.0)) throw ConfigError("ga mutation_decay must lie in (0, 1]");
}

void PatternSearchConfig::validate() const {
    if (!(initial_mesh >= 0.0)) throw ConfigError("ps initial_mesh must be >= 0");
    if (!(expansion >= 1.0)) throw ConfigError("ps expansion must be >= 1");
    if (!(contraction > 0.0 && contraction < 1.0)) throw ConfigError("ps contraction must lie in (0, 1)");
    if (!(mesh_tolerance > 0.0)) throw ConfigError("ps mesh_tolerance must be > 0");
    if (max_evaluations < 1) throw ConfigError("ps max_evaluations must be >= 1");
}

void PsoConfig::validate() const {
    if (swarm_size < 1) throw ConfigError("pso swarm_size must be >= 1");
    if (iterations < 1) throw ConfigError("pso iterations must be >= 1");
    if (!(inertia >= 0.0) || !(cognitive >= 0.0) || !(social >= 0.0))
        throw ConfigError("pso coefficients must be >= 0");
}

namespace {

// Counts every invocation and rejects non-finite scores.
class CountedScore {
  public:
    CountedScore(const ScoreFn& fn) : fn_(fn) {}

    double operator()(const std::array<double, 3>& p) {
        ++count_;
        const double v = fn_(p);
        if (!std::isfinite(v))
            throw NumericError("score function returned a non-finite value at (" + std::to_string(p[0]) + ", " +
                               std::to_string(p[1]) + ", " + std::to_string(p[2]) + ")");
        return v;
    }

    long count() const { return count_; }

  private:
    const ScoreFn& fn_;
    long count_ = 0;
};

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace

OptResult simulated_annealing(const ScoreFn& score_fn, const SearchBox& box, const AnnealConfig& cfg) {
    box.validate();
    cfg.validate();
    Stopwatch watch;
    CountedScore score(score_fn);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::array<double, 3> current = box.clamp(cfg.start.value_or(box.center()));
    double current_score = score(current);
    OptResult result;
    result.best_params = current;
    result.best_score = current_score;

    // Step sizes shrink with the temperature ratio, the way MATLAB's default
    // annealing step function ties step length to temperature.
    double temperature = cfg.initial_temperature;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        const double ratio = temperature / cfg.initial_temperature;
        std::array<double, 3> proposal;
        for (int a = 0; a < 3; ++a) {
            const double step = cfg.proposal_scale * box.extent(a) * ratio;
            proposal[static_cast<std::size_t>(a)] = current[static_cast<std::size_t>(a)] + step * gauss(rng);
        }
        proposal = box.clamp(proposal);
        const double proposal_score = score(proposal);
        const double delta = proposal_score - current_score;
        // Metropolis rule for maximization.
        if (delta >= 0.0 || unit(rng) < std::exp(delta / std::max(temperature, 1e-300))) {
            current = proposal;
            current_score = proposal_score;
        }
        if (proposal_score > result.best_score) {
            result.best_score = proposal_score;
            result.best_params = proposal;
        }
        temperature *= cfg.cooling_rate;
    }
    result.evaluation_count = score.count();
    result.runtime_seconds = watch.seconds();
    return result;
}

OptResult genetic_algorithm(const ScoreFn& score_fn, const SearchBox& box, const GaConfig& cfg) {
    box.validate();
    cfg.validate();
    Stopwatch watch;
    CountedScore score(score_fn);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, cfg.population - 1);

    const int n = cfg.population;
    std::vector<std::array<double, 3>> pop(static_cast<std::size_t>(n));
    std::vector<double> fitness(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a)
            pop[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] =
                box.lo(a) + unit(rng) * box.extent(a);
    if (cfg.start) pop[0] = box.clamp(*cfg.start);
    for (int i = 0; i < n; ++i) fitness[static_cast<std::size_t>(i)] = score(pop[static_cast<std::size_t>(i)]);

    OptResult result;
    auto track_best = [&](int i) {
        if (fitness[static_cast<std::size_t>(i)] > result.best_score || result.evaluation_count == 0) {
            result.best_score = fitness[static_cast<std::size_t>(i)];
            result.best_params = pop[static_cast<std::size_t>(i)];
        }
    };
    result.best_score = fitness[0];
    result.best_params = pop[0];
    for (int i = 1; i < n; ++i)
        if (fitness[static_cast<std::size_t>(i)] > result.best_score) {
            result.best_score = fitness[static_cast<std::size_t>(i)];
            result.best_params = pop[static_cast<std::size_t>(i)];
        }

    auto tournament = [&]() -> int {
        int best = pick(rng);
        for (int t = 1; t < cfg.tournament_size; ++t) {
            const int challenger = pick(rng);
            if (fitness[static_cast<std::size_t>(challenger)] > fitness[static_cast<std::size_t>(best)])
                best = challenger;
        }
        return best;
    };

    double mutation_std_factor = cfg.mutation_scale;
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int g = 0; g < cfg.generations; ++g) {
        // Sort indices by fitness (descending) for elitism.
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return fitness[static_cast<std::size_t>(a)] > fitness[static_cast<std::size_t>(b)]; });

        std::vector<std::array<double, 3>> next(static_cast<std::size_t>(n));
        std::vector<double> next_fitness(static_cast<std::size_t>(n));
        for (int e = 0; e < cfg.elite_count; ++e) {
            next[static_cast<std::size_t>(e)] = pop[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])];
            next_fitness[static_cast<std::size_t>(e)] = fitness[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])];
        }
        for (int i = cfg.elite_count; i < n; ++i) {
            const std::array<double, 3>& pa = pop[static_cast<std::size_t>(tournament())];
            const std::array<double, 3>& pb = pop[static_cast<std::size_t>(tournament())];
            std::array<double, 3> child = pa;
            if (unit(rng) < cfg.crossover_rate) {
                // BLX-0.5 blend crossover per gene.
                for (int a = 0; a < 3; ++a) {
                    const double low = std::min(pa[static_cast<std::size_t>(a)], pb[static_cast<std::size_t>(a)]);
                    const double high = std::max(pa[static_cast<std::size_t>(a)], pb[static_cast<std::size_t>(a)]);
                    const double span = high - low;
                    child[static_cast<std::size_t>(a)] = low - 0.5 * span + unit(rng) * (2.0 * span);
                }
            }
            for (int a = 0; a < 3; ++a)
                if (unit(rng) < cfg.mutation_rate)
                    child[static_cast<std::size_t>(a)] += mutation_std_factor * box.extent(a) * gauss(rng);
            next[static_cast<std::size_t>(i)] = box.clamp(child);
            next_fitness[static_cast<std::size_t>(i)] = score(next[static_cast<std::size_t>(i)]);
        }
        pop = std::move(next);
        fitness = std::move(next_fitness);
        for (int i = 0; i < n; ++i) track_best(i);
        mutation_std_factor *= cfg.mutation_decay;
    }
    result.evaluation_count = score.count();
    result.runtime_seconds = watch.seconds();
    return result;
}

OptResult pattern_search(const ScoreFn& score_fn, const SearchBox& box, const PatternSearchConfig& cfg) {
    box.validate();
    cfg.validate();
    Stopwatch watch;
    CountedScore score(score_fn);

    const double max_extent = std::max({box.extent(0), box.extent(1), box.extent(2)});
    double mesh = cfg.initial_mesh > 0.0 ? cfg.initial_mesh : 0.10 * max_extent;
    if (mesh <= cfg.mesh_tolerance)
        throw ConfigError("ps initial mesh must exceed the mesh tolerance");

    std::array<double, 3> incumbent = box.clamp(cfg.start.value_or(box.center()));
    double incumbent_score = score(incumbent);
    OptResult result;
    result.best_params = incumbent;
    result.best_score = incumbent_score;

    // Compass poll: +-e_i in a fixed order, first improvement accepted.
    while (mesh > cfg.mesh_tolerance && score.count() < cfg.max_evaluations) {
        bool improved = false;
        for (int a = 0; a < 3 && !improved; ++a) {
            for (int sgn = 0; sgn < 2 && !improved; ++sgn) {
                std::array<double, 3> trial = incumbent;
                trial[static_cast<std::size_t>(a)] += (sgn == 0 ? mesh : -mesh);
                trial = box.clamp(trial);
                const double trial_score = score(trial);
                if (trial_score > incumbent_score) {
                    incumbent = trial;
                    incumbent_score = trial_score;
                    improved = true;
                }
                if (score.count() >= cfg.max_evaluations) break;
            }
        }
        if (improved)
            mesh *= cfg.expansion;
        else
            mesh *= cfg.contraction;
    }
    result.best_params = incumbent;
    result.best_score = incumbent_score;
    result.evaluation_count = score.count();
    result.runtime_seconds = watch.seconds();
    return result;
}

OptResult particle_swarm(const ScoreFn& score_fn, const SearchBox& box, const PsoConfig& cfg) {
    box.validate();
    cfg.validate();
    Stopwatch watch;
    CountedScore score(score_fn);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int n = cfg.swarm_size;
    std::vector<std::array<double, 3>> pos(static_cast<std::size_t>(n));
    std::vector<std::array<double, 3>> vel(static_cast<std::size_t>(n), {0.0, 0.0, 0.0});
    std::vector<std::array<double, 3>> pbest(static_cast<std::size_t>(n));
    std::vector<double> pbest_score(static_cast<std::size_t>(n));

    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a)
            pos[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = box.lo(a) + unit(rng) * box.extent(a);
    if (cfg.start) pos[0] = box.clamp(*cfg.start);

    OptResult result;
    for (int i = 0; i < n; ++i) {
        pbest[static_cast<std::size_t>(i)] = pos[static_cast<std::size_t>(i)];
        pbest_score[static_cast<std::size_t>(i)] = score(pos[static_cast<std::size_t>(i)]);
        if (i == 0 || pbest_score[static_cast<std::size_t>(i)] > result.best_score) {
            result.best_score = pbest_score[static_cast<std::size_t>(i)];
            result.best_params = pbest[static_cast<std::size_t>(i)];
        }
    }

    for (int it = 0; it < cfg.iterations; ++it) {
        for (int i = 0; i < n; ++i) {
            auto& x = pos[static_cast<std::size_t>(i)];
            auto& v = vel[static_cast<std::size_t>(i)];
            for (int a = 0; a < 3; ++a) {
                const double r1 = unit(rng);
                const double r2 = unit(rng);
                v[static_cast<std::size_t>(a)] =
                    cfg.inertia * v[static_cast<std::size_t>(a)] +
                    cfg.cognitive * r1 * (pbest[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(a)]) +
                    cfg.social * r2 * (result.best_params[static_cast<std::size_t>(a)] - x[static_cast<std::size_t>(a)]);
                x[static_cast<std::size_t>(a)] += v[static_cast<std::size_t>(a)];
            }
            x = box.clamp(x);
            const double s = score(x);
            if (s > pbest_score[static_cast<std::size_t>(i)]) {
                pbest_score[static_cast<std::size_t>(i)] = s;
                pbest[static_cast<std::size_t>(i)] = x;
            }
            if (s > result.best_score) {
                result.best_score = s;
                result.best_params = x;
            }
        }
    }
    result.evaluation_count = score.count();
    result.runtime_seconds = watch.seconds();
    return result;
}

}  // namespace iron
