#include "iron/geometry.hpp"

#include <cmath>
#include <string>

namespace iron {

namespace {

bool all_finite(const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

using Mat3 = std::array<double, 9>;

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int r = 0; r < 3; ++r)
        for (int col = 0; col < 3; ++col) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a[static_cast<std::size_t>(r * 3 + k)] * b[static_cast<std::size_t>(k * 3 + col)];
            c[static_cast<std::size_t>(r * 3 + col)] = s;
        }
    return c;
}

Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {c, -s, 0, s, c, 0, 0, 0, 1};
}

Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {c, 0, s, 0, 1, 0, -s, 0, c};
}

Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {1, 0, 0, 0, c, -s, 0, s, c};
}

double frobenius(const Mat3& m) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return std::sqrt(s);
}

double det3(const Mat3& m) {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

}  // namespace

void PointSet2D::validate() const {
    if (points.empty()) throw ConfigError("point set must contain at least one point");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y))
            throw ConfigError("point set contains a non-finite coordinate at index " + std::to_string(i));
    }
}

void PoseParams::validate() const {
    const double v[6] = {theta_x, theta_y, theta_z, alpha, beta, gamma};
    if (!all_finite(v, 6)) throw ConfigError("pose contains a non-finite parameter");
}

void CameraModel::validate() const {
    if (!(focal_px > 0.0)) throw ConfigError("camera focal_px must be > 0");
    if (!(nominal_height > 0.0)) throw ConfigError("camera nominal_height must be > 0");
    if (!(reference_gsd > 0.0)) throw ConfigError("camera reference_gsd must be > 0");
    if (!std::isfinite(principal_point.x) || !std::isfinite(principal_point.y))
        throw ConfigError("camera principal point must be finite");
}

void normalize_homography(Homography& h) {
    const double pivot = h.h[8];
    if (std::fabs(pivot) > 1e-9) {
        for (double& v : h.h) v /= pivot;
        h.h[8] = 1.0;
    } else {
        const double norm = frobenius(h.h);
        if (norm > 0.0)
            for (double& v : h.h) v /= norm;
    }
}

Homography multiply(const Homography& a, const Homography& b) {
    Homography out;
    out.h = mat_mul(a.h, b.h);
    return out;
}

Homography pose_to_homography(const PoseParams& pose, const CameraModel& cam) {
    pose.validate();
    cam.validate();

    const double height = cam.nominal_height + pose.theta_y;
    if (!(height > 0.0))
        throw GeometryError("degenerate pose: camera height " + std::to_string(height) +
                            " m is at or below the ground plane");

    // Nominal nadir orientation: camera x along east, y along -north, z down.
    // Yaw/pitch/roll are intrinsic rotations of the camera rig (Z-Y-X order),
    // composed on the camera side of the nominal view.
    const Mat3 nadir{1, 0, 0, 0, -1, 0, 0, 0, -1};
    const Mat3 rig = mat_mul(mat_mul(rot_z(pose.alpha), rot_y(pose.beta)), rot_x(pose.gamma));
    const Mat3 cam_to_world = mat_mul(nadir, rig);
    // World -> camera rotation is the transpose.
    Mat3 world_to_cam;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            world_to_cam[static_cast<std::size_t>(r * 3 + c)] = cam_to_world[static_cast<std::size_t>(c * 3 + r)];

    // Optical axis (camera z) in world coordinates must point below the
    // horizon, otherwise the ground plane passes through the camera view
    // degenerately.
    const double axis_down = -cam_to_world[8];  // dot(z_cam_world, (0,0,-1))
    if (!(axis_down > 1e-9))
        throw GeometryError("degenerate pose: optical axis does not face the ground plane");

    // Ground point of reference pixel (xr, yr): east = gsd*xr, north = -gsd*yr.
    // Columns map homogeneous (xr, yr, 1) to world offset from the camera
    // center C = (east: theta_z, north: theta_x, up: height).
    const Mat3 plane{cam.reference_gsd, 0, -pose.theta_z,
                     0, -cam.reference_gsd, -pose.theta_x,
                     0, 0, -height};

    const Mat3 intrinsics{cam.focal_px, 0, cam.principal_point.x,
                          0, cam.focal_px, cam.principal_point.y,
                          0, 0, 1};

    Homography out;
    out.h = mat_mul(intrinsics, mat_mul(world_to_cam, plane));
    normalize_homography(out);
    if (std::fabs(det3(out.h)) < 1e-300)
        throw GeometryError("degenerate pose: induced homography is singular");
    return out;
}

PointSet2D transform_points(const PointSet2D& points, const Homography& h) {
    points.validate();
    PointSet2D out;
    out.points.resize(points.points.size());
    for (std::size_t i = 0; i < points.points.size(); ++i) {
        const Vec2& p = points.points[i];
        const double w = h.h[6] * p.x + h.h[7] * p.y + h.h[8];
        if (std::fabs(w) <= 1e-12)
            throw GeometryError("projective degeneracy: point index " + std::to_string(i) +
                                " maps to the plane at infinity");
        out.points[i].x = (h.h[0] * p.x + h.h[1] * p.y + h.h[2]) / w;
        out.points[i].y = (h.h[3] * p.x + h.h[4] * p.y + h.h[5]) / w;
    }
    return out;
}

Homography invert_homography(const Homography& h) {
    const Mat3& m = h.h;
    const double det = det3(m);
    Mat3 adj{m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
             m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
             m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
    if (det == 0.0) throw GeometryError("singular homography: determinant is zero");
    Homography inv;
    for (std::size_t i = 0; i < 9; ++i) inv.h[i] = adj[i] / det;
    // Cheap condition estimate via Frobenius norms.
    const double cond = frobenius(m) * frobenius(inv.h);
    if (!(cond <= 1e12))
        throw GeometryError("singular homography: condition estimate " + std::to_string(cond) + " exceeds 1e12");
    normalize_homography(inv);
    return inv;
}

}  // namespace iron
