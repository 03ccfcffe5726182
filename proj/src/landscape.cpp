#include "iron/landscape.hpp"

#include <cmath>

#include "iron/parallel.hpp"

namespace iron {

void GridSpec::validate() const {
    if (nodes_per_axis < 2) throw ConfigError("grid nodes_per_axis must be >= 2");
    const AxisRange* axes[3] = {&x, &y, &z};
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        if (!std::isfinite(axes[a]->min) || !std::isfinite(axes[a]->max) || !(axes[a]->max > axes[a]->min))
            throw ConfigError(std::string("grid axis ") + names[a] + " must satisfy max > min with finite bounds");
    }
}

void SimilarityTensor::validate() const {
    grid.validate();
    const std::size_t s = static_cast<std::size_t>(grid.nodes_per_axis);
    if (values.size() != s * s * s) throw ConfigError("tensor value count does not match grid size");
    for (double v : values)
        if (!std::isfinite(v)) throw NumericError("tensor contains a non-finite value");
}

SimilarityTensor build_similarity_tensor(const PointSet2D& u, const PointSet2D& v,
                                         const std::array<double, 3>& fixed_angles,
                                         const GridSpec& grid, const CameraModel& cam,
                                         const KernelConfig& kcfg, const ObjectiveConfig& ocfg,
                                         int n_threads, const std::string& provenance) {
    grid.validate();
    u.validate();
    v.validate();
    cam.validate();
    kcfg.validate();
    ocfg.validate();

    const int s = grid.nodes_per_axis;
    SimilarityTensor out;
    out.grid = grid;
    out.provenance = provenance;
    out.values.assign(static_cast<std::size_t>(s) * s * s, 0.0);

    parallel_for(static_cast<std::int64_t>(s) * s * s, n_threads, [&](std::int64_t node) {
        const int i = static_cast<int>(node / (s * s));
        const int j = static_cast<int>((node / s) % s);
        const int k = static_cast<int>(node % s);
        PoseParams pose;
        pose.theta_x = grid.value_x(i);
        pose.theta_y = grid.value_y(j);
        pose.theta_z = grid.value_z(k);
        pose.alpha = fixed_angles[0];
        pose.beta = fixed_angles[1];
        pose.gamma = fixed_angles[2];
        try {
            out.values[static_cast<std::size_t>(node)] = objective(u, v, pose, cam, kcfg, ocfg);
        } catch (const Error& e) {
            throw GeometryError("tensor node (" + std::to_string(i) + "," + std::to_string(j) + "," +
                                std::to_string(k) + "): " + e.what());
        }
    });
    return out;
}

GridIndex argmax_tensor(const SimilarityTensor& t) {
    t.validate();
    const int s = t.grid.nodes_per_axis;
    GridIndex best{0, 0, 0};
    double best_value = t.values[0];
    std::size_t idx = 0;
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j)
            for (int k = 0; k < s; ++k, ++idx) {
                if (t.values[idx] > best_value) {
                    best_value = t.values[idx];
                    best = GridIndex{i, j, k};
                }
            }
    return best;
}

SubTensor extract_subtensor(const SimilarityTensor& t, const GridIndex& center, int b) {
    if (b < 2 || b % 2 != 0) throw ConfigError("sub-tensor window parameter b must be even and >= 2");
    const int s = t.grid.nodes_per_axis;
    const int half = b / 2;
    const int c[3] = {center.i, center.j, center.k};
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        if (c[a] < half || c[a] > s - 1 - half)
            throw BoundsError(std::string("sub-tensor center out of bounds on axis ") + names[a] + ": index " +
                              std::to_string(c[a]) + " not in [" + std::to_string(half) + ", " +
                              std::to_string(s - 1 - half) + "]");
    }
    SubTensor sub;
    sub.edge = b + 1;
    sub.center = center;
    sub.values.resize(static_cast<std::size_t>(sub.edge) * sub.edge * sub.edge);
    std::size_t idx = 0;
    for (int l = -half; l <= half; ++l)
        for (int m = -half; m <= half; ++m)
            for (int n = -half; n <= half; ++n, ++idx)
                sub.values[idx] = t.at(center.i + l, center.j + m, center.k + n);
    return sub;
}

std::array<double, 3> make_label(const GridIndex& center, const GridIndex& optimum, double scale) {
    return {(optimum.i - center.i) / scale, (optimum.j - center.j) / scale, (optimum.k - center.k) / scale};
}

std::array<double, 3> denormalize_offset(const std::array<double, 3>& prediction, double scale,
                                         const GridSpec& grid) {
    grid.validate();
    return {prediction[0] * scale * grid.step_x(), prediction[1] * scale * grid.step_y(),
            prediction[2] * scale * grid.step_z()};
}

}  // namespace iron
