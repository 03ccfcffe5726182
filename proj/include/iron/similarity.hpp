#pragma once

#include "iron/geometry.hpp"

namespace iron {

// Gaussian kernel bandwidth in reference-image pixels.
struct KernelConfig {
    double sigma = 2.0;

    void validate() const;
};

enum class Regularizer { none, squared_translation_norm };

struct ObjectiveConfig {
    double lambda = 0.0;
    Regularizer regularizer = Regularizer::none;
    // Per-axis normalization for the squared-translation-norm regularizer,
    // conventionally half the search-range extent of each axis (meters).
    double scale_norm_x = 1.0;
    double scale_norm_y = 1.0;
    double scale_norm_z = 1.0;

    void validate() const;
};

// Gaussian-mixture kernel correlation between two point sets:
//   (1 / (M*N)) * sum_m sum_n exp(-|a_m - b_n|^2 / (4 sigma^2))
// Symmetric in its arguments, strictly positive, and 1 exactly when both
// sets collapse onto one identical point.
double kernel_correlation(const PointSet2D& a, const PointSet2D& b, const KernelConfig& cfg);

// Registration score to MAXIMIZE: kernel correlation of the pose-transformed
// sensed set against the reference set, minus lambda times the regularizer.
double objective(const PointSet2D& u, const PointSet2D& v, const PoseParams& pose,
                 const CameraModel& cam, const KernelConfig& kcfg, const ObjectiveConfig& ocfg);

}  // namespace iron
