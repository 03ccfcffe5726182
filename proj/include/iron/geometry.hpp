#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "iron/error.hpp"

namespace iron {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Finite ordered list of 2D feature points in reference-image pixels.
struct PointSet2D {
    std::vector<Vec2> points;

    std::size_t size() const { return points.size(); }

    // Throws ConfigError unless every coordinate is finite and size >= 1.
    void validate() const;
};

// Six transformation parameters. The three translations (meters) are the
// quantities being optimized; the three angles (radians) are held fixed.
struct PoseParams {
    double theta_x = 0.0;  // north translation
    double theta_y = 0.0;  // altitude translation
    double theta_z = 0.0;  // east translation
    double alpha = 0.0;    // yaw
    double beta = 0.0;     // pitch
    double gamma = 0.0;    // roll

    void validate() const;
};

// Pinhole camera over a flat ground plane. The reference image is an
// orthophoto of the plane at reference_gsd meters per pixel.
struct CameraModel {
    double focal_px = 1000.0;
    Vec2 principal_point{0.0, 0.0};
    double nominal_height = 1000.0;  // meters above the ground plane
    double reference_gsd = 1.0;      // meters per reference pixel

    void validate() const;
};

// 3x3 projective map, row-major, normalized so h[8] == 1 when |h[8]| > 1e-9,
// otherwise to unit Frobenius norm.
struct Homography {
    std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double at(int row, int col) const { return h[static_cast<std::size_t>(row * 3 + col)]; }
    double& at(int row, int col) { return h[static_cast<std::size_t>(row * 3 + col)]; }

    static Homography identity() { return Homography{}; }
};

// Pins h[8] to 1 when clearly nonzero, else rescales to unit Frobenius norm.
void normalize_homography(Homography& h);

Homography multiply(const Homography& a, const Homography& b);

// Plane-induced homography from reference-image pixels to sensed-image
// pixels for a pinhole camera at ground position (east = theta_z,
// north = theta_x), height = nominal_height + theta_y, oriented as the
// nominal nadir view composed with yaw/pitch/roll (Z-Y-X intrinsic order).
// Throws GeometryError for degenerate poses (camera at or below the plane,
// or a rotation that tips the view away from the plane).
Homography pose_to_homography(const PoseParams& pose, const CameraModel& cam);

// Projective image of each point, order preserved. Throws GeometryError
// naming the offending index if any point maps with |w| <= 1e-12.
PointSet2D transform_points(const PointSet2D& points, const Homography& h);

// Throws GeometryError if the matrix is numerically singular
// (condition estimate > 1e12).
Homography invert_homography(const Homography& h);

}  // namespace iron
