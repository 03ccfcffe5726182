#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "iron/similarity.hpp"

namespace iron {

struct AxisRange {
    double min = 0.0;
    double max = 0.0;
};

// Regular S x S x S search grid over the three translation parameters.
// Axis order everywhere is (x: north, y: altitude, z: east); grid indices
// are 0-based.
struct GridSpec {
    AxisRange x{-150.0, 150.0};
    AxisRange y{-75.0, 75.0};
    AxisRange z{-150.0, 150.0};
    int nodes_per_axis = 31;

    void validate() const;

    double step_x() const { return (x.max - x.min) / (nodes_per_axis - 1); }
    double step_y() const { return (y.max - y.min) / (nodes_per_axis - 1); }
    double step_z() const { return (z.max - z.min) / (nodes_per_axis - 1); }

    double value_x(int i) const { return x.min + i * step_x(); }
    double value_y(int j) const { return y.min + j * step_y(); }
    double value_z(int k) const { return z.min + k * step_z(); }
};

struct GridIndex {
    int i = 0;
    int j = 0;
    int k = 0;

    bool operator==(const GridIndex&) const = default;
};

// Whole-search-space similarity tensor: values over all S^3 grid nodes,
// row-major with i outermost and k innermost. Values are kept at 64-bit
// precision in memory; the file format stores them as 32-bit floats.
struct SimilarityTensor {
    GridSpec grid;
    std::vector<double> values;
    std::string provenance;

    double at(int i, int j, int k) const {
        const int s = grid.nodes_per_axis;
        return values[(static_cast<std::size_t>(i) * s + j) * s + k];
    }
    double& at(int i, int j, int k) {
        const int s = grid.nodes_per_axis;
        return values[(static_cast<std::size_t>(i) * s + j) * s + k];
    }

    void validate() const;
};

// (b+1)^3 window of tensor values centered on an interior grid node.
struct SubTensor {
    int edge = 9;  // b + 1
    std::vector<double> values;
    GridIndex center;

    double at(int l, int m, int n) const {
        return values[(static_cast<std::size_t>(l) * edge + m) * edge + n];
    }
};

// One network training pair: sub-tensor values (as stored: 32-bit) plus the
// normalized offset label pointing from the window center to the tensor's
// global argmax.
struct TrainingSample {
    std::vector<float> input;    // edge^3 values
    std::array<float, 3> label;  // (opt - center) / label_scale
    GridIndex center;
};

// Evaluates the objective at every grid node with the given fixed angles.
// Node evaluations are independent and may run on n_threads; the result is
// identical for any thread count. Errors are rethrown naming the node.
SimilarityTensor build_similarity_tensor(const PointSet2D& u, const PointSet2D& v,
                                         const std::array<double, 3>& fixed_angles,
                                         const GridSpec& grid, const CameraModel& cam,
                                         const KernelConfig& kcfg, const ObjectiveConfig& ocfg,
                                         int n_threads = 1, const std::string& provenance = "");

// Lexicographically smallest index attaining the global maximum.
GridIndex argmax_tensor(const SimilarityTensor& t);

// Copies the (b+1)^3 window centered at `center`. Throws BoundsError naming
// the violating axis when the window does not fit (valid centers lie in
// [b/2, S-1-b/2] per axis).
SubTensor extract_subtensor(const SimilarityTensor& t, const GridIndex& center, int b = 8);

// Normalized offset label; components are (optimum - center) / scale and are
// deliberately not clipped to [-1, 1].
std::array<double, 3> make_label(const GridIndex& center, const GridIndex& optimum, double scale = 22.0);

// Maps a normalized prediction back to metric offsets (meters per axis).
std::array<double, 3> denormalize_offset(const std::array<double, 3>& prediction, double scale,
                                         const GridSpec& grid);

}  // namespace iron
