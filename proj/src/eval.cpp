#include "iron/eval.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "iron/rng.hpp"

namespace iron {

void EvalConfig::validate() const {
    if (!(t_pm > 0.0)) throw ConfigError("eval t_pm must be > 0");
    if (!(t_pt > 0.0)) throw ConfigError("eval t_pt must be > 0");
}

double param_accuracy(const std::vector<std::array<double, 3>>& estimates,
                      const std::vector<std::array<double, 3>>& truths, double t_pm) {
    if (estimates.size() != truths.size()) throw ConfigError("param_accuracy length mismatch");
    if (estimates.empty()) throw ConfigError("param_accuracy requires at least one trial");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        bool ok = true;
        for (int a = 0; a < 3; ++a)
            if (!(std::fabs(estimates[i][static_cast<std::size_t>(a)] - truths[i][static_cast<std::size_t>(a)]) < t_pm))
                ok = false;
        if (ok) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(estimates.size());
}

double param_rmse(const std::vector<std::array<double, 3>>& estimates,
                  const std::vector<std::array<double, 3>>& truths) {
    if (estimates.size() != truths.size()) throw ConfigError("param_rmse length mismatch");
    if (estimates.empty()) throw ConfigError("param_rmse requires at least one trial");
    double sum = 0.0;
    for (std::size_t i = 0; i < estimates.size(); ++i)
        for (int a = 0; a < 3; ++a) {
            const double d = estimates[i][static_cast<std::size_t>(a)] - truths[i][static_cast<std::size_t>(a)];
            sum += d * d;
        }
    return std::sqrt(sum / static_cast<double>(estimates.size()));
}

namespace {

std::vector<double> residuals(const PointSet2D& u, const PointSet2D& v,
                              const std::vector<std::pair<int, int>>& correspondences,
                              const PoseParams& estimated_pose, const CameraModel& cam) {
    if (correspondences.empty()) throw ConfigError("point metrics require nonempty correspondences");
    const PointSet2D tu = transform_points(u, pose_to_homography(estimated_pose, cam));
    std::vector<double> out;
    out.reserve(correspondences.size());
    for (const auto& [ui, vi] : correspondences) {
        const Vec2& a = tu.points[static_cast<std::size_t>(ui)];
        const Vec2& b = v.points[static_cast<std::size_t>(vi)];
        out.push_back(std::hypot(a.x - b.x, a.y - b.y));
    }
    return out;
}

}  // namespace

double point_accuracy(const PointSet2D& u, const PointSet2D& v,
                      const std::vector<std::pair<int, int>>& correspondences,
                      const PoseParams& estimated_pose, const CameraModel& cam, double t_pt) {
    const std::vector<double> r = residuals(u, v, correspondences, estimated_pose, cam);
    std::size_t hits = 0;
    for (double d : r)
        if (d < t_pt) ++hits;
    return static_cast<double>(hits) / static_cast<double>(r.size());
}

double point_rmse(const PointSet2D& u, const PointSet2D& v,
                  const std::vector<std::pair<int, int>>& correspondences,
                  const PoseParams& estimated_pose, const CameraModel& cam) {
    const std::vector<double> r = residuals(u, v, correspondences, estimated_pose, cam);
    double sum = 0.0;
    for (double d : r) sum += d * d;
    return std::sqrt(sum / static_cast<double>(r.size()));
}

const char* method_name(Method m) {
    switch (m) {
        case Method::anneal: return "anneal";
        case Method::ga: return "ga";
        case Method::ps: return "ps";
        case Method::pso: return "pso";
        case Method::iron: return "iron";
    }
    return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
    for (Method m : {Method::anneal, Method::ga, Method::ps, Method::pso, Method::iron})
        if (name == method_name(m)) return m;
    return std::nullopt;
}

namespace {

MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    double ssq = 0.0;
    for (double x : xs) ssq += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ssq / static_cast<double>(xs.size()));
    return s;
}

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace

BenchmarkReport run_benchmark(const std::vector<SceneSpec>& scenes, const GridSpec& grid,
                              const CameraModel& cam, const KernelConfig& kcfg,
                              const ObjectiveConfig& ocfg, const BenchmarkConfig& bcfg,
                              const IronModel* model, int n_threads) {
    if (scenes.empty()) throw ConfigError("benchmark needs at least one scene");
    if (bcfg.trials_per_scene < 1) throw ConfigError("trials_per_scene must be >= 1");
    bcfg.eval.validate();
    grid.validate();
    const bool wants_iron =
        std::find(bcfg.methods.begin(), bcfg.methods.end(), Method::iron) != bcfg.methods.end();
    if (wants_iron && !bcfg.stub_perfect && model == nullptr)
        throw ConfigError("benchmark includes the iron method but no model was provided");

    BenchmarkReport report;
    report.methods = bcfg.methods;
    report.scene_count = static_cast<int>(scenes.size());
    report.trials_per_scene = bcfg.trials_per_scene;
    report.seed = bcfg.seed;

    const SearchBox box = SearchBox::from_grid(grid);
    const int s = grid.nodes_per_axis;
    const int half = bcfg.window_b / 2;
    const int per_axis = s - bcfg.window_b;
    if (per_axis < 1) throw ConfigError("grid too small for the benchmark window");

    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const SceneSpec& spec = scenes[si];
        const GridIndex true_node = pose_grid_node(spec.true_pose, grid);
        const SyntheticScene scene = generate_scene(spec, cam);
        const std::array<double, 3> angles{spec.true_pose.alpha, spec.true_pose.beta, spec.true_pose.gamma};
        const std::array<double, 3> truth{spec.true_pose.theta_x, spec.true_pose.theta_y, spec.true_pose.theta_z};
        (void)true_node;

        SimilarityTensor tensor;
        if (wants_iron) {
            Stopwatch build_watch;
            tensor = build_similarity_tensor(scene.u, scene.v, angles, grid, cam, kcfg, ocfg, n_threads,
                                             "benchmark scene " + std::to_string(si));
            report.tensor_build_seconds += build_watch.seconds();
        }

        for (int trial = 0; trial < bcfg.trials_per_scene; ++trial) {
            std::mt19937_64 trial_rng(seed_mix(bcfg.seed, si, static_cast<std::uint64_t>(trial)));
            std::uniform_int_distribution<int> pick(half, half + per_axis - 1);
            const GridIndex init{pick(trial_rng), pick(trial_rng), pick(trial_rng)};
            const std::array<double, 3> start{grid.value_x(init.i), grid.value_y(init.j), grid.value_z(init.k)};

            const ScoreFn score = [&](const std::array<double, 3>& p) {
                PoseParams pose;
                pose.theta_x = p[0];
                pose.theta_y = p[1];
                pose.theta_z = p[2];
                pose.alpha = angles[0];
                pose.beta = angles[1];
                pose.gamma = angles[2];
                return objective(scene.u, scene.v, pose, cam, kcfg, ocfg);
            };

            for (std::size_t mi = 0; mi < bcfg.methods.size(); ++mi) {
                const Method method = bcfg.methods[mi];
                TrialRecord rec;
                rec.scene = static_cast<int>(si);
                rec.trial = trial;
                rec.method = method;
                rec.init = init;
                rec.truth = truth;
                try {
                    std::array<double, 3> estimate{};
                    if (method == Method::iron) {
                        Stopwatch watch;
                        if (bcfg.stub_perfect) {
                            const GridIndex opt = argmax_tensor(tensor);
                            estimate = {grid.value_x(opt.i), grid.value_y(opt.j), grid.value_z(opt.k)};
                        } else {
                            const Prediction pred =
                                predict_optimum(*model, tensor, init, bcfg.label_scale, angles);
                            estimate = {pred.params.theta_x, pred.params.theta_y, pred.params.theta_z};
                        }
                        rec.runtime_seconds = watch.seconds();
                        rec.evaluation_count = 1.0;
                    } else {
                        const std::uint64_t mseed = seed_mix(bcfg.seed, si, static_cast<std::uint64_t>(trial), mi);
                        OptResult opt;
                        switch (method) {
                            case Method::anneal: {
                                AnnealConfig c = bcfg.anneal;
                                c.seed = mseed;
                                c.start = start;
                                opt = simulated_annealing(score, box, c);
                                break;
                            }
                            case Method::ga: {
                                GaConfig c = bcfg.ga;
                                c.seed = mseed;
                                c.start = start;
                                opt = genetic_algorithm(score, box, c);
                                break;
                            }
                            case Method::ps: {
                                PatternSearchConfig c = bcfg.ps;
                                c.start = start;
                                opt = pattern_search(score, box, c);
                                break;
                            }
                            case Method::pso: {
                                PsoConfig c = bcfg.pso;
                                c.seed = mseed;
                                c.start = start;
                                opt = particle_swarm(score, box, c);
                                break;
                            }
                            default:
                                break;
                        }
                        estimate = opt.best_params;
                        rec.runtime_seconds = opt.runtime_seconds;
                        rec.evaluation_count = static_cast<double>(opt.evaluation_count);
                    }
                    rec.estimate = estimate;
                    bool hit = true;
                    double dev_sq = 0.0;
                    const double steps[3] = {grid.step_x(), grid.step_y(), grid.step_z()};
                    for (int a = 0; a < 3; ++a) {
                        const double dev = estimate[static_cast<std::size_t>(a)] - truth[static_cast<std::size_t>(a)];
                        const double normalized = dev / (bcfg.label_scale * steps[a]);
                        if (!(std::fabs(normalized) < bcfg.eval.t_pm)) hit = false;
                        const double in_steps = dev / steps[a];
                        dev_sq += in_steps * in_steps;
                    }
                    rec.param_acc = hit ? 1.0 : 0.0;
                    rec.param_rmse = std::sqrt(dev_sq);
                    PoseParams est_pose;
                    est_pose.theta_x = estimate[0];
                    est_pose.theta_y = estimate[1];
                    est_pose.theta_z = estimate[2];
                    est_pose.alpha = angles[0];
                    est_pose.beta = angles[1];
                    est_pose.gamma = angles[2];
                    rec.point_acc = point_accuracy(scene.u, scene.v, scene.correspondences, est_pose, cam,
                                                   bcfg.eval.t_pt);
                    rec.point_rmse = point_rmse(scene.u, scene.v, scene.correspondences, est_pose, cam);
                } catch (const std::exception& e) {
                    rec.failed = true;
                    rec.error = e.what();
                }
                report.trials.push_back(std::move(rec));
            }
        }
    }

    // Aggregation: deterministic fold over records grouped per method in
    // (scene, trial) order, which is the order they were emitted.
    for (Method m : bcfg.methods) {
        std::vector<double> pa, pr, qa, qr, rt, st;
        int excluded = 0;
        for (const TrialRecord& rec : report.trials) {
            if (rec.method != m) continue;
            if (rec.failed) {
                ++excluded;
                continue;
            }
            pa.push_back(rec.param_acc);
            pr.push_back(rec.param_rmse);
            qa.push_back(rec.point_acc);
            qr.push_back(rec.point_rmse);
            rt.push_back(rec.runtime_seconds);
            st.push_back(rec.evaluation_count);
        }
        MethodSummary sum;
        sum.param_acc = stat_of(pa);
        sum.param_rmse = stat_of(pr);
        sum.point_acc = stat_of(qa);
        sum.point_rmse = stat_of(qr);
        sum.runtime = stat_of(rt);
        sum.opti_step = stat_of(st);
        sum.trials = static_cast<int>(pa.size());
        sum.excluded = excluded;
        report.summary[method_name(m)] = sum;
    }
    return report;
}

std::string fingerprint(const std::string& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

namespace {

nlohmann::ordered_json stat_json(const MetricStat& s) {
    return nlohmann::ordered_json{{"mean", s.mean}, {"std", s.stddev}};
}

}  // namespace

std::string report_to_json(const BenchmarkReport& report) {
    nlohmann::ordered_json j;
    j["scene_count"] = report.scene_count;
    j["trials_per_scene"] = report.trials_per_scene;
    j["seed"] = report.seed;
    nlohmann::ordered_json methods = nlohmann::ordered_json::object();
    for (Method m : report.methods) {
        const MethodSummary& s = report.summary.at(method_name(m));
        nlohmann::ordered_json entry;
        entry["ParamAcc"] = stat_json(s.param_acc);
        entry["ParamRMSE"] = stat_json(s.param_rmse);
        entry["PointAcc"] = stat_json(s.point_acc);
        entry["PointRMSE"] = stat_json(s.point_rmse);
        entry["Runtime"] = stat_json(s.runtime);
        entry["OptiStep"] = stat_json(s.opti_step);
        entry["trials"] = s.trials;
        entry["excluded"] = s.excluded;
        methods[method_name(m)] = entry;
    }
    j["methods"] = methods;
    j["runtime_tensor_build_seconds"] = report.tensor_build_seconds;
    nlohmann::ordered_json trials = nlohmann::ordered_json::array();
    for (const TrialRecord& rec : report.trials) {
        nlohmann::ordered_json t;
        t["scene"] = rec.scene;
        t["trial"] = rec.trial;
        t["method"] = method_name(rec.method);
        t["init"] = {rec.init.i, rec.init.j, rec.init.k};
        if (rec.failed) {
            t["failed"] = true;
            t["error"] = rec.error;
        } else {
            t["estimate"] = rec.estimate;
            t["truth"] = rec.truth;
            t["ParamAcc"] = rec.param_acc;
            t["ParamRMSE"] = rec.param_rmse;
            t["PointAcc"] = rec.point_acc;
            t["PointRMSE"] = rec.point_rmse;
            t["runtime_seconds"] = rec.runtime_seconds;
            t["OptiStep"] = rec.evaluation_count;
        }
        trials.push_back(t);
    }
    j["trials"] = trials;
    nlohmann::ordered_json fp = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.fingerprints) fp[k] = v;
    j["fingerprints"] = fp;
    return j.dump(2) + "\n";
}

std::string report_to_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "metric,stat";
    for (Method m : report.methods) out << ',' << method_name(m);
    out << '\n';
    const char* metric_names[6] = {"ParamAcc", "ParamRMSE", "PointAcc", "PointRMSE", "Runtime", "OptiStep"};
    for (int metric = 0; metric < 6; ++metric) {
        for (int row = 0; row < 2; ++row) {
            out << metric_names[metric] << ',' << (row == 0 ? "mean" : "std");
            for (Method m : report.methods) {
                const MethodSummary& s = report.summary.at(method_name(m));
                const MetricStat* stat = nullptr;
                switch (metric) {
                    case 0: stat = &s.param_acc; break;
                    case 1: stat = &s.param_rmse; break;
                    case 2: stat = &s.point_acc; break;
                    case 3: stat = &s.point_rmse; break;
                    case 4: stat = &s.runtime; break;
                    case 5: stat = &s.opti_step; break;
                }
                out << ',' << (row == 0 ? stat->mean : stat->stddev);
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace iron
