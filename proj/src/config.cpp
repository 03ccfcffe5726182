#include "iron/config.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "iron/rng.hpp"

namespace iron {

using nlohmann::json;

void SuiteConfig::validate() const {
    if (scenes < 1) throw ConfigError("suite.scenes must be >= 1");
    if (centers_per_scene < 1) throw ConfigError("suite.centers_per_scene must be >= 1");
    if (orbit_step_degrees < 0.0) throw ConfigError("suite.orbit_step_degrees must be >= 0");
}

void SubTensorConfig::validate() const {
    if (b < 2 || b % 2 != 0) throw ConfigError("subtensor.b must be even and >= 2");
    if (!(label_scale > 0.0)) throw ConfigError("subtensor.label_scale must be > 0");
}

void RunConfig::validate() const {
    if (threads < 1) throw ConfigError("threads must be >= 1");
    camera.validate();
    grid.validate();
    kernel.validate();
    objective.validate();
    scene.validate();
    suite.validate();
    subtensor.validate();
    train.validate();
    anneal.validate();
    ga.validate();
    ps.validate();
    pso.validate();
    eval.validate();
    if (trials_per_scene < 1) throw ConfigError("trials_per_scene must be >= 1");
    if (methods.empty()) throw ConfigError("methods must not be empty");
    if (grid.nodes_per_axis - subtensor.b < 1)
        throw ConfigError("grid too small for the configured sub-tensor window");
}

namespace {

double get_num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(std::string("config field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw ConfigError(std::string("config field '") + key + "' must be an integer");
    return j.at(key).get<int>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_unsigned() && !j.at(key).is_number_integer())
        throw ConfigError(std::string("config field '") + key + "' must be an integer");
    return j.at(key).get<std::uint64_t>();
}

std::string get_str(const json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError(std::string("config field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

AxisRange get_axis(const json& j, const char* key, AxisRange fallback) {
    if (!j.contains(key)) return fallback;
    const json& a = j.at(key);
    AxisRange r = fallback;
    r.min = get_num(a, "min", r.min);
    r.max = get_num(a, "max", r.max);
    return r;
}

RunConfig from_json(const json& j) {
    RunConfig c;
    c.seed = get_u64(j, "seed", c.seed);
    c.threads = get_int(j, "threads", c.threads);
    c.output_dir = get_str(j, "output_dir", c.output_dir);
    if (j.contains("camera")) {
        const json& cam = j.at("camera");
        c.camera.focal_px = get_num(cam, "focal_px", c.camera.focal_px);
        c.camera.nominal_height = get_num(cam, "nominal_height", c.camera.nominal_height);
        c.camera.reference_gsd = get_num(cam, "reference_gsd", c.camera.reference_gsd);
        if (cam.contains("principal_point")) {
            const json& pp = cam.at("principal_point");
            if (!pp.is_array() || pp.size() != 2)
                throw ConfigError("camera.principal_point must be an array [cx, cy]");
            c.camera.principal_point = {pp[0].get<double>(), pp[1].get<double>()};
        }
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        c.grid.x = get_axis(g, "x", c.grid.x);
        c.grid.y = get_axis(g, "y", c.grid.y);
        c.grid.z = get_axis(g, "z", c.grid.z);
        c.grid.nodes_per_axis = get_int(g, "nodes_per_axis", c.grid.nodes_per_axis);
    }
    if (j.contains("kernel")) c.kernel.sigma = get_num(j.at("kernel"), "sigma", c.kernel.sigma);
    if (j.contains("objective")) {
        const json& o = j.at("objective");
        c.objective.lambda = get_num(o, "lambda", c.objective.lambda);
        const std::string reg = get_str(o, "regularizer", "none");
        if (reg == "none")
            c.objective.regularizer = Regularizer::none;
        else if (reg == "squared-translation-norm")
            c.objective.regularizer = Regularizer::squared_translation_norm;
        else
            throw ConfigError("objective.regularizer must be 'none' or 'squared-translation-norm'");
    }
    if (j.contains("scene")) {
        const json& s = j.at("scene");
        c.scene.n_points = get_int(s, "n_points", c.scene.n_points);
        c.scene.noise_sigma = get_num(s, "noise_sigma", c.scene.noise_sigma);
        c.scene.outlier_fraction = get_num(s, "outlier_fraction", c.scene.outlier_fraction);
        c.scene.field_extent = get_num(s, "field_extent", c.scene.field_extent);
        c.scene.clusters = get_int(s, "clusters", c.scene.clusters);
        c.scene.cluster_std_px = get_num(s, "cluster_std_px", c.scene.cluster_std_px);
    }
    if (j.contains("suite")) {
        const json& s = j.at("suite");
        c.suite.scenes = get_int(s, "scenes", c.suite.scenes);
        c.suite.centers_per_scene = get_int(s, "centers_per_scene", c.suite.centers_per_scene);
        c.suite.orbit_step_degrees = get_num(s, "orbit_step_degrees", c.suite.orbit_step_degrees);
    }
    if (j.contains("subtensor")) {
        const json& s = j.at("subtensor");
        c.subtensor.b = get_int(s, "b", c.subtensor.b);
        c.subtensor.label_scale = get_num(s, "label_scale", c.subtensor.label_scale);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        c.train.learning_rate = get_num(t, "learning_rate", c.train.learning_rate);
        c.train.beta1 = get_num(t, "beta1", c.train.beta1);
        c.train.beta2 = get_num(t, "beta2", c.train.beta2);
        c.train.epsilon = get_num(t, "epsilon", c.train.epsilon);
        c.train.epochs = get_int(t, "epochs", c.train.epochs);
        c.train.batch_size = get_int(t, "batch_size", c.train.batch_size);
        c.train.validation_fraction = get_num(t, "validation_fraction", c.train.validation_fraction);
    }
    if (j.contains("heuristics")) {
        const json& h = j.at("heuristics");
        if (h.contains("anneal")) {
            const json& a = h.at("anneal");
            c.anneal.initial_temperature = get_num(a, "initial_temperature", c.anneal.initial_temperature);
            c.anneal.cooling_rate = get_num(a, "cooling_rate", c.anneal.cooling_rate);
            c.anneal.proposal_scale = get_num(a, "proposal_scale", c.anneal.proposal_scale);
            c.anneal.max_iterations = get_int(a, "max_iterations", c.anneal.max_iterations);
        }
        if (h.contains("ga")) {
            const json& g = h.at("ga");
            c.ga.population = get_int(g, "population", c.ga.population);
            c.ga.generations = get_int(g, "generations", c.ga.generations);
            c.ga.crossover_rate = get_num(g, "crossover_rate", c.ga.crossover_rate);
            c.ga.mutation_rate = get_num(g, "mutation_rate", c.ga.mutation_rate);
            c.ga.elite_count = get_int(g, "elite_count", c.ga.elite_count);
            c.ga.tournament_size = get_int(g, "tournament_size", c.ga.tournament_size);
            c.ga.mutation_scale = get_num(g, "mutation_scale", c.ga.mutation_scale);
            c.ga.mutation_decay = get_num(g, "mutation_decay", c.ga.mutation_decay);
        }
        if (h.contains("ps")) {
            const json& p = h.at("ps");
            c.ps.initial_mesh = get_num(p, "initial_mesh", c.ps.initial_mesh);
            c.ps.expansion = get_num(p, "expansion", c.ps.expansion);
            c.ps.contraction = get_num(p, "contraction", c.ps.contraction);
            c.ps.mesh_tolerance = get_num(p, "mesh_tolerance", c.ps.mesh_tolerance);
        }
        if (h.contains("pso")) {
            const json& p = h.at("pso");
            c.pso.swarm_size = get_int(p, "swarm_size", c.pso.swarm_size);
            c.pso.iterations = get_int(p, "iterations", c.pso.iterations);
            c.pso.inertia = get_num(p, "inertia", c.pso.inertia);
            c.pso.cognitive = get_num(p, "cognitive", c.pso.cognitive);
            c.pso.social = get_num(p, "social", c.pso.social);
        }
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        c.eval.t_pm = get_num(e, "t_pm", c.eval.t_pm);
        c.eval.t_pt = get_num(e, "t_pt", c.eval.t_pt);
        c.trials_per_scene = get_int(e, "trials_per_scene", c.trials_per_scene);
        if (e.contains("methods")) {
            if (!e.at("methods").is_array()) throw ConfigError("eval.methods must be an array of method names");
            c.methods.clear();
            for (const json& m : e.at("methods")) {
                const auto parsed = method_from_name(m.get<std::string>());
                if (!parsed) throw ConfigError("unknown method '" + m.get<std::string>() + "' in eval.methods");
                c.methods.push_back(*parsed);
            }
        }
    }
    return c;
}

json parse_override_value(const std::string& text) {
    const json parsed = json::parse(text, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    return json(text);  // fall back to a plain string
}

}  // namespace

RunConfig load_config(const std::string& path_or_empty, const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!path_or_empty.empty()) {
        std::ifstream in(path_or_empty);
        if (!in) throw ConfigError("cannot open config file " + path_or_empty);
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ConfigError("config file " + path_or_empty + " is not valid JSON: " + e.what());
        }
        if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    }
    for (const std::string& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + ov + "' must have the form dotted.path=value");
        const std::string path = ov.substr(0, eq);
        const json value = parse_override_value(ov.substr(eq + 1));
        json* node = &doc;
        std::istringstream keys(path);
        std::string key, prev;
        std::vector<std::string> parts;
        while (std::getline(keys, key, '.')) {
            if (key.empty()) throw ConfigError("override '" + ov + "' has an empty path segment");
            parts.push_back(key);
        }
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) (*node)[parts[i]] = json::object();
            node = &(*node)[parts[i]];
        }
        (*node)[parts.back()] = value;
    }
    RunConfig cfg = from_json(doc);
    cfg.validate();
    return cfg;
}

std::string RunConfig::canonical() const {
    std::ostringstream out;
    out.precision(17);
    out << "seed=" << seed << ";threads=" << threads
        << ";camera=" << camera.focal_px << ',' << camera.principal_point.x << ',' << camera.principal_point.y
        << ',' << camera.nominal_height << ',' << camera.reference_gsd
        << ";grid=" << grid.x.min << ',' << grid.x.max << ',' << grid.y.min << ',' << grid.y.max << ','
        << grid.z.min << ',' << grid.z.max << ',' << grid.nodes_per_axis
        << ";kernel=" << kernel.sigma
        << ";objective=" << objective.lambda << ',' << static_cast<int>(objective.regularizer)
        << ";scene=" << scene.n_points << ',' << scene.noise_sigma << ',' << scene.outlier_fraction << ','
        << scene.field_extent << ',' << scene.clusters << ',' << scene.cluster_std_px
        << ";suite=" << suite.scenes << ',' << suite.centers_per_scene << ',' << suite.orbit_step_degrees
        << ";subtensor=" << subtensor.b << ',' << subtensor.label_scale
        << ";train=" << train.learning_rate << ',' << train.beta1 << ',' << train.beta2 << ','
        << train.epsilon << ',' << train.epochs << ',' << train.batch_size << ',' << train.validation_fraction
        << ";anneal=" << anneal.initial_temperature << ',' << anneal.cooling_rate << ','
        << anneal.proposal_scale << ',' << anneal.max_iterations
        << ";ga=" << ga.population << ',' << ga.generations << ',' << ga.crossover_rate << ','
        << ga.mutation_rate << ',' << ga.elite_count << ',' << ga.tournament_size << ',' << ga.mutation_scale
        << ',' << ga.mutation_decay
        << ";ps=" << ps.initial_mesh << ',' << ps.expansion << ',' << ps.contraction << ',' << ps.mesh_tolerance
        << ";pso=" << pso.swarm_size << ',' << pso.iterations << ',' << pso.inertia << ',' << pso.cognitive
        << ',' << pso.social
        << ";eval=" << eval.t_pm << ',' << eval.t_pt << ',' << trials_per_scene << ";methods=";
    for (Method m : methods) out << method_name(m) << ',';
    return out.str();
}

std::vector<SceneSpec> make_suite(const RunConfig& cfg, std::uint64_t suite_salt, int scenes,
                                  bool noiseless) {
    if (scenes < 1) throw ConfigError("suite needs at least one scene");
    std::vector<PoseParams> orbit;
    if (cfg.suite.orbit_step_degrees > 0.0)
        orbit = orbit_cluster(PoseParams{}, cfg.suite.orbit_step_degrees);
    std::vector<SceneSpec> out;
    out.reserve(static_cast<std::size_t>(scenes));
    const int s = cfg.grid.nodes_per_axis;
    for (int i = 0; i < scenes; ++i) {
        SceneSpec spec = cfg.scene;
        spec.seed = scene_seed(seed_mix(cfg.seed, suite_salt), i);
        if (noiseless) {
            spec.noise_sigma = 0.0;
            spec.outlier_fraction = 0.0;
        }
        std::mt19937_64 rng(seed_mix(spec.seed, 0x5CE4E5ULL));
        std::uniform_int_distribution<int> node(0, s - 1);
        const int ni = node(rng), nj = node(rng), nk = node(rng);
        spec.true_pose = PoseParams{};
        spec.true_pose.theta_x = cfg.grid.value_x(ni);
        spec.true_pose.theta_y = cfg.grid.value_y(nj);
        spec.true_pose.theta_z = cfg.grid.value_z(nk);
        if (!orbit.empty()) spec.true_pose.alpha = orbit[static_cast<std::size_t>(i) % orbit.size()].alpha;
        out.push_back(spec);
    }
    return out;
}

}  // namespace iron
