#include "iron/similarity.hpp"

#include <cmath>

namespace iron {

void KernelConfig::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("kernel sigma must be finite and > 0");
}

void ObjectiveConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("objective lambda must be finite and >= 0");
    if (regularizer == Regularizer::squared_translation_norm &&
        (!(scale_norm_x > 0.0) || !(scale_norm_y > 0.0) || !(scale_norm_z > 0.0)))
        throw ConfigError("regularizer scale_norm components must be > 0");
}

double kernel_correlation(const PointSet2D& a, const PointSet2D& b, const KernelConfig& cfg) {
    cfg.validate();
    if (a.points.empty() || b.points.empty()) throw ConfigError("kernel correlation requires nonempty point sets");
    const double inv_denom = 1.0 / (4.0 * cfg.sigma * cfg.sigma);
    double sum = 0.0;
    for (const Vec2& pa : a.points) {
        for (const Vec2& pb : b.points) {
            const double dx = pa.x - pb.x;
            const double dy = pa.y - pb.y;
            const double arg = -(dx * dx + dy * dy) * inv_denom;
            // exp underflows to exactly zero below -746; skip the libm call.
            if (arg > -746.0) sum += std::exp(arg);
        }
    }
    return sum / (static_cast<double>(a.points.size()) * static_cast<double>(b.points.size()));
}

namespace {

double regularizer_value(const PoseParams& pose, const ObjectiveConfig& ocfg) {
    switch (ocfg.regularizer) {
        case Regularizer::none:
            return 0.0;
        case Regularizer::squared_translation_norm: {
            const double rx = pose.theta_x / ocfg.scale_norm_x;
            const double ry = pose.theta_y / ocfg.scale_norm_y;
            const double rz = pose.theta_z / ocfg.scale_norm_z;
            return rx * rx + ry * ry + rz * rz;
        }
    }
    return 0.0;
}

}  // namespace

double objective(const PointSet2D& u, const PointSet2D& v, const PoseParams& pose,
                 const CameraModel& cam, const KernelConfig& kcfg, const ObjectiveConfig& ocfg) {
    ocfg.validate();
    const Homography h = pose_to_homography(pose, cam);
    const double corr = kernel_correlation(transform_points(u, h), v, kcfg);
    return corr - ocfg.lambda * regularizer_value(pose, ocfg);
}

}  // namespace iron
