#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "iron/config.hpp"
#include "iron/eval.hpp"
#include "iron/rng.hpp"
#include "iron/serialize.hpp"
#include "iron/trainer.hpp"

namespace {

using namespace iron;
namespace fs = std::filesystem;

// Exit codes: 0 success, 2 config/validation error, 3 format error,
// 4 runtime/numeric error.
constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;
constexpr int kExitRuntime = 4;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

RunConfig resolve_config(const CommonArgs& args) {
    std::vector<std::string> overrides = args.overrides;
    if (args.seed) overrides.push_back("seed=" + std::to_string(*args.seed));
    if (!args.seed && args.config_path.empty()) {
        if (const char* env = std::getenv("IRON_SEED")) overrides.push_back(std::string("seed=") + env);
    }
    if (args.threads) overrides.push_back("threads=" + std::to_string(*args.threads));
    return load_config(args.config_path, overrides);
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--set", args.overrides, "dotted.path=value config override (repeatable)");
    cmd->add_option("--seed", args.seed, "master seed (also honors IRON_SEED)");
    cmd->add_option("--threads", args.threads, "worker thread count");
}

void ensure_parent_dir(const std::string& path) {
    const fs::path p = fs::path(path).parent_path();
    if (!p.empty()) fs::create_directories(p);
}

nlohmann::ordered_json scene_record_json(const SceneRecord& rec) {
    nlohmann::ordered_json j;
    j["seed"] = rec.spec.seed;
    j["n_points"] = rec.spec.n_points;
    j["noise_sigma"] = rec.spec.noise_sigma;
    j["outlier_fraction"] = rec.spec.outlier_fraction;
    j["field_extent"] = rec.spec.field_extent;
    j["clusters"] = rec.spec.clusters;
    j["cluster_std_px"] = rec.spec.cluster_std_px;
    j["true_pose"] = {rec.spec.true_pose.theta_x, rec.spec.true_pose.theta_y, rec.spec.true_pose.theta_z,
                      rec.spec.true_pose.alpha, rec.spec.true_pose.beta, rec.spec.true_pose.gamma};
    j["true_node"] = {rec.true_node.i, rec.true_node.j, rec.true_node.k};
    j["argmax_node"] = {rec.argmax_node.i, rec.argmax_node.j, rec.argmax_node.k};
    j["first_sample"] = rec.first_sample;
    j["sample_count"] = rec.sample_count;
    return j;
}

int cmd_gen_data(const CommonArgs& args, const std::string& out_path) {
    const RunConfig cfg = resolve_config(args);
    const std::string dataset_path =
        out_path.empty() ? (fs::path(cfg.output_dir) / "dataset.irnd").string() : out_path;
    ensure_parent_dir(dataset_path);
    fs::create_directories(cfg.output_dir);

    const std::vector<SceneSpec> scenes = make_suite(cfg, /*suite_salt=*/1, cfg.suite.scenes);
    std::cerr << "generating " << scenes.size() << " scenes x " << cfg.suite.centers_per_scene
              << " centers..." << std::endl;
    const Dataset ds = build_dataset(scenes, cfg.suite.centers_per_scene, cfg.grid, cfg.camera, cfg.kernel,
                                     cfg.objective, cfg.subtensor.b, cfg.subtensor.label_scale, cfg.seed,
                                     cfg.threads);
    write_dataset(ds.samples, dataset_path);

    nlohmann::ordered_json manifest;
    manifest["master_seed"] = ds.manifest.master_seed;
    manifest["centers_per_scene"] = ds.manifest.centers_per_scene;
    manifest["label_scale"] = ds.manifest.label_scale;
    manifest["sample_count"] = ds.samples.size();
    manifest["label_mean"] = ds.manifest.label_mean;
    manifest["label_min"] = ds.manifest.label_min;
    manifest["label_max"] = ds.manifest.label_max;
    manifest["config_fingerprint"] = fingerprint(cfg.canonical());
    nlohmann::ordered_json scene_list = nlohmann::ordered_json::array();
    for (const SceneRecord& rec : ds.manifest.scenes) scene_list.push_back(scene_record_json(rec));
    manifest["scenes"] = scene_list;
    const std::string manifest_path = dataset_path + ".manifest.json";
    std::ofstream mf(manifest_path, std::ios::trunc);
    mf << manifest.dump(2) << "\n";
    if (!mf) throw Error("write failed for " + manifest_path);

    std::array<double, 3> mean = ds.manifest.label_mean;
    std::cout << "samples: " << ds.samples.size() << "\n"
              << "label mean: (" << mean[0] << ", " << mean[1] << ", " << mean[2] << ")\n"
              << "label min: (" << ds.manifest.label_min[0] << ", " << ds.manifest.label_min[1] << ", "
              << ds.manifest.label_min[2] << ")\n"
              << "label max: (" << ds.manifest.label_max[0] << ", " << ds.manifest.label_max[1] << ", "
              << ds.manifest.label_max[2] << ")\n"
              << "dataset: " << dataset_path << "\n"
              << "manifest: " << manifest_path << std::endl;
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& dataset_path, const std::string& model_path,
              std::optional<int> epochs_override) {
    RunConfig cfg = resolve_config(args);
    if (epochs_override) {
        cfg.train.epochs = *epochs_override;
        cfg.train.validate();
    }
    const std::vector<TrainingSample> all = read_dataset(dataset_path);
    std::vector<TrainingSample> train_part, val_part;
    split_dataset(all, cfg.train.validation_fraction, cfg.seed, train_part, val_part);

    IronModel model = IronModel::standard(seed_mix(cfg.seed, 0x11A0DE1ULL));
    TrainConfig tc = cfg.train;
    tc.seed = seed_mix(cfg.seed, 0x7124173ULL);
    std::cerr << "training on " << train_part.size() << " samples (" << val_part.size()
              << " held out), " << tc.epochs << " epochs..." << std::endl;
    const TrainResult result = train(model, train_part, tc, cfg.threads);

    const std::string out_model =
        model_path.empty() ? (fs::path(cfg.output_dir) / "model.irnw").string() : model_path;
    ensure_parent_dir(out_model);
    fs::create_directories(cfg.output_dir);
    write_model(model, out_model);
    const std::string csv_path = out_model + ".loss.csv";
    write_loss_csv(result.loss_history, csv_path);

    const SplitMetrics train_metrics = evaluate_split(model, train_part, cfg.eval.t_pm, cfg.threads);
    std::cout << "final train loss: " << train_metrics.mean_loss << "\n";
    if (!val_part.empty()) {
        const SplitMetrics val_metrics = evaluate_split(model, val_part, cfg.eval.t_pm, cfg.threads);
        std::cout << "final validation loss: " << val_metrics.mean_loss << "\n"
                  << "validation ParamAcc: " << val_metrics.param_acc << "\n";
    }
    std::cout << "model: " << out_model << "\n" << "loss csv: " << csv_path << std::endl;
    return 0;
}

int cmd_predict(const CommonArgs& args, const std::string& model_path, const std::string& tensor_path,
                const std::string& center_text, bool stub_perfect) {
    const RunConfig cfg = resolve_config(args);
    const SimilarityTensor tensor = read_tensor(tensor_path);

    GridIndex center;
    if (std::sscanf(center_text.c_str(), "%d,%d,%d", &center.i, &center.j, &center.k) != 3)
        throw ConfigError("--center must be i,j,k (0-based grid indices)");

    std::array<double, 3> normalized{};
    std::array<double, 3> metric{};
    std::array<double, 3> estimate{};
    if (stub_perfect) {
        // Test hook: the grid-argmax oracle stands in for the network.
        const SubTensor sub = extract_subtensor(tensor, center, cfg.subtensor.b);
        (void)sub;
        const GridIndex opt = argmax_tensor(tensor);
        const std::array<double, 3> label = make_label(center, opt, cfg.subtensor.label_scale);
        normalized = label;
        metric = denormalize_offset(label, cfg.subtensor.label_scale, tensor.grid);
        estimate = {tensor.grid.value_x(opt.i), tensor.grid.value_y(opt.j), tensor.grid.value_z(opt.k)};
    } else {
        if (model_path.empty()) throw ConfigError("predict requires --model (or --stub-perfect)");
        const IronModel model = read_model(model_path);
        const Prediction pred = predict_optimum(model, tensor, center, cfg.subtensor.label_scale, {0, 0, 0});
        normalized = pred.normalized_offset;
        metric = pred.metric_offset;
        estimate = {pred.params.theta_x, pred.params.theta_y, pred.params.theta_z};
    }
    std::cout << "initialization node: (" << center.i << ", " << center.j << ", " << center.k << ")\n"
              << "initialization params (m): (" << tensor.grid.value_x(center.i) << ", "
              << tensor.grid.value_y(center.j) << ", " << tensor.grid.value_z(center.k) << ")\n"
              << "predicted offset (normalized): (" << normalized[0] << ", " << normalized[1] << ", "
              << normalized[2] << ")\n"
              << "predicted offset (m): (" << metric[0] << ", " << metric[1] << ", " << metric[2] << ")\n"
              << "estimated optimum (m): (" << estimate[0] << ", " << estimate[1] << ", " << estimate[2]
              << ")\n"
              << "evaluations: 1" << std::endl;
    return 0;
}

int cmd_benchmark(const CommonArgs& args, const std::string& methods_csv, const std::string& model_path,
                  bool stub_perfect, const std::string& out_path, std::optional<int> scenes_override,
                  bool noiseless) {
    RunConfig cfg = resolve_config(args);
    BenchmarkConfig bcfg;
    bcfg.trials_per_scene = cfg.trials_per_scene;
    bcfg.seed = seed_mix(cfg.seed, 0xBE7C12ULL);
    bcfg.stub_perfect = stub_perfect;
    bcfg.window_b = cfg.subtensor.b;
    bcfg.label_scale = cfg.subtensor.label_scale;
    bcfg.eval = cfg.eval;
    bcfg.anneal = cfg.anneal;
    bcfg.ga = cfg.ga;
    bcfg.ps = cfg.ps;
    bcfg.pso = cfg.pso;
    bcfg.methods = cfg.methods;
    if (!methods_csv.empty()) {
        bcfg.methods.clear();
        std::istringstream ms(methods_csv);
        std::string name;
        while (std::getline(ms, name, ',')) {
            const auto parsed = method_from_name(name);
            if (!parsed) throw ConfigError("unknown method '" + name + "' in --methods");
            bcfg.methods.push_back(*parsed);
        }
        if (bcfg.methods.empty()) throw ConfigError("--methods must name at least one method");
    }

    const bool wants_iron =
        std::find(bcfg.methods.begin(), bcfg.methods.end(), Method::iron) != bcfg.methods.end();
    IronModel model;
    const IronModel* model_ptr = nullptr;
    if (wants_iron && !stub_perfect) {
        if (model_path.empty()) throw ConfigError("benchmark includes iron: provide --model or --stub-perfect");
        model = read_model(model_path);
        model_ptr = &model;
    }

    const int n_scenes = scenes_override.value_or(cfg.suite.scenes);
    const std::vector<SceneSpec> scenes = make_suite(cfg, /*suite_salt=*/2, n_scenes, noiseless);
    std::cerr << "benchmarking " << scenes.size() << " scenes x " << bcfg.trials_per_scene << " trials..."
              << std::endl;
    BenchmarkReport report =
        run_benchmark(scenes, cfg.grid, cfg.camera, cfg.kernel, cfg.objective, bcfg, model_ptr, cfg.threads);
    report.fingerprints["run_config"] = fingerprint(cfg.canonical());

    fs::create_directories(cfg.output_dir);
    const std::string report_path =
        out_path.empty() ? (fs::path(cfg.output_dir) / "benchmark.json").string() : out_path;
    ensure_parent_dir(report_path);
    {
        std::ofstream out(report_path, std::ios::trunc);
        out << report_to_json(report);
        if (!out) throw Error("write failed for " + report_path);
    }
    const std::string csv_path = report_path + ".summary.csv";
    {
        std::ofstream out(csv_path, std::ios::trunc);
        out << report_to_csv(report);
        if (!out) throw Error("write failed for " + csv_path);
    }
    std::cout << report_to_csv(report);
    std::cout << "report: " << report_path << "\n" << "summary: " << csv_path << std::endl;
    return 0;
}

int cmd_export_landscape(const CommonArgs& args, std::optional<std::uint64_t> scene_seed_arg,
                         const std::string& out_path, bool noiseless) {
    const RunConfig cfg = resolve_config(args);
    std::vector<SceneSpec> scenes = make_suite(cfg, /*suite_salt=*/3, 1, noiseless);
    SceneSpec spec = scenes.front();
    if (scene_seed_arg) spec.seed = *scene_seed_arg;
    const SyntheticScene scene = generate_scene(spec, cfg.camera);
    const std::array<double, 3> angles{spec.true_pose.alpha, spec.true_pose.beta, spec.true_pose.gamma};
    std::cerr << "building " << cfg.grid.nodes_per_axis << "^3 tensor..." << std::endl;
    const SimilarityTensor tensor =
        build_similarity_tensor(scene.u, scene.v, angles, cfg.grid, cfg.camera, cfg.kernel, cfg.objective,
                                cfg.threads, "scene seed " + std::to_string(spec.seed));
    fs::create_directories(cfg.output_dir);
    const std::string tensor_path =
        out_path.empty() ? (fs::path(cfg.output_dir) / "landscape.irnt").string() : out_path;
    ensure_parent_dir(tensor_path);
    write_tensor(tensor, tensor_path);
    const GridIndex opt = argmax_tensor(tensor);
    std::cout << "tensor: " << tensor_path << "\n"
              << "argmax node: (" << opt.i << ", " << opt.j << ", " << opt.k << ")\n"
              << "true node: (" << pose_grid_node(spec.true_pose, cfg.grid).i << ", "
              << pose_grid_node(spec.true_pose, cfg.grid).j << ", "
              << pose_grid_node(spec.true_pose, cfg.grid).k << ")" << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IRON: one-shot learned registration optimizer over similarity tensors"};
    app.require_subcommand(1);

    CommonArgs gen_args;
    std::string gen_out;
    std::optional<int> gen_scenes, gen_centers;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a training dataset and manifest");
    add_common(gen, gen_args);
    gen->add_option("--out", gen_out, "output dataset path (.irnd)");
    gen->add_option("--scenes", gen_scenes, "number of scenes");
    gen->add_option("--centers", gen_centers, "window centers per scene");

    CommonArgs train_args;
    std::string train_dataset, train_model;
    std::optional<int> train_epochs;
    CLI::App* tr = app.add_subcommand("train", "train a model on a dataset file");
    add_common(tr, train_args);
    tr->add_option("--dataset", train_dataset, "IRND dataset path")->required();
    tr->add_option("--out", train_model, "output model path (.irnw)");
    tr->add_option("--epochs", train_epochs, "override epoch count");

    CommonArgs pred_args;
    std::string pred_model, pred_tensor, pred_center;
    bool pred_stub = false;
    CLI::App* pr = app.add_subcommand("predict", "one-shot prediction from a tensor window");
    add_common(pr, pred_args);
    pr->add_option("--model", pred_model, "IRNW model path");
    pr->add_option("--tensor", pred_tensor, "IRNT tensor path")->required();
    pr->add_option("--center", pred_center, "initialization node i,j,k (0-based)")->required();
    pr->add_flag("--stub-perfect", pred_stub, "use the grid-argmax oracle instead of a model (test hook)");

    CommonArgs bench_args;
    std::string bench_methods, bench_model, bench_out;
    bool bench_stub = false, bench_noiseless = false;
    std::optional<int> bench_scenes;
    CLI::App* be = app.add_subcommand("benchmark", "multi-method benchmark over a scene suite");
    add_common(be, bench_args);
    be->add_option("--methods", bench_methods, "comma-separated subset of anneal,ga,ps,pso,iron");
    be->add_option("--model", bench_model, "IRNW model for the iron method");
    be->add_option("--scenes", bench_scenes, "number of scenes");
    be->add_flag("--stub-perfect", bench_stub, "use the grid-argmax oracle for iron (test hook)");
    be->add_flag("--noiseless", bench_noiseless, "suppress scene noise and outliers");

    CommonArgs exp_args;
    std::string exp_out;
    std::optional<std::uint64_t> exp_seed;
    bool exp_noiseless = false;
    CLI::App* ex = app.add_subcommand("export-landscape", "write a full similarity tensor (IRNT)");
    add_common(ex, exp_args);
    ex->add_option("--scene-seed", exp_seed, "scene seed override");
    ex->add_option("--out", exp_out, "output tensor path (.irnt)");
    ex->add_flag("--noiseless", exp_noiseless, "suppress scene noise and outliers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            if (gen_scenes) gen_args.overrides.push_back("suite.scenes=" + std::to_string(*gen_scenes));
            if (gen_centers)
                gen_args.overrides.push_back("suite.centers_per_scene=" + std::to_string(*gen_centers));
            return cmd_gen_data(gen_args, gen_out);
        }
        if (tr->parsed()) return cmd_train(train_args, train_dataset, train_model, train_epochs);
        if (pr->parsed()) return cmd_predict(pred_args, pred_model, pred_tensor, pred_center, pred_stub);
        if (be->parsed())
            return cmd_benchmark(bench_args, bench_methods, bench_model, bench_stub, bench_out, bench_scenes,
                                 bench_noiseless);
        if (ex->parsed()) return cmd_export_landscape(exp_args, exp_seed, exp_out, exp_noiseless);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << std::endl;
        return kExitFormat;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitRuntime;
    }
    return 0;
}
