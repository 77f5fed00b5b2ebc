#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fxd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using ArrayXX = Eigen::ArrayXXd;
using MaskXX = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Error type for all recoverable failures (parse errors, invariant
/// violations, bad arguments). The message names the offending entity.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

/// Sigmoid clamped to the open interval (eps, 1-eps) so box-constrained
/// coordinates stay strictly inside their box even for huge parameters.
inline double sigmoid_open(double x, double eps = 1e-7) {
    double s = sigmoid(x);
    return std::min(std::max(s, eps), 1.0 - eps);
}

inline double inverse_sigmoid(double y) {
    return std::log(y / (1.0 - y));
}

// ---------------------------------------------------------------------------
// Quaternions stored as Vec4 in (w, x, y, z) order.
// ---------------------------------------------------------------------------

inline Vec4 quat_identity() { return Vec4(1, 0, 0, 0); }

inline Vec4 quat_normalized(const Vec4& q) {
    double n = q.norm();
    if (n <= 0.0 || !std::isfinite(n))
        throw Error("quaternion has zero or non-finite norm");
    return q / n;
}

/// Rotation matrix of a quaternion; normalizes internally.
inline Mat3 quat_to_mat(const Vec4& q_raw) {
    Vec4 q = quat_normalized(q_raw);
    double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

/// Quaternion of a proper rotation matrix (Shepperd's method: branch on
/// the largest diagonal term for stability).
inline Vec4 quat_from_mat(const Mat3& m) {
    double t = m.trace();
    Vec4 q;
    if (t > 0.0) {
        double s = std::sqrt(t + 1.0) * 2.0;
        q = Vec4(0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s,
                 (m(1, 0) - m(0, 1)) / s);
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
        double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
        q = Vec4((m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s,
                 (m(0, 2) + m(2, 0)) / s);
    } else if (m(1, 1) > m(2, 2)) {
        double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
        q = Vec4((m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s,
                 (m(1, 2) + m(2, 1)) / s);
    } else {
        double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
        q = Vec4((m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s,
                 (m(1, 2) + m(2, 1)) / s, 0.25 * s);
    }
    return quat_normalized(q);
}

/// dR/dq_k evaluated at a unit quaternion, without the normalization chain.
inline void quat_rotation_jacobian(const Vec4& q_unit, Mat3 dR[4]) {
    double w = q_unit[0], x = q_unit[1], y = q_unit[2], z = q_unit[3];
    dR[0] << 0, -z, y, z, 0, -x, -y, x, 0;
    dR[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    dR[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    dR[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    for (int k = 0; k < 4; ++k) dR[k] *= 2.0;
}

/// d(q/|q|)/dq. The raw parameter vector is free; rotations consume the
/// normalized value, so gradients must pass through this.
inline Mat4 quat_normalize_jacobian(const Vec4& q_raw) {
    double n = q_raw.norm();
    Vec4 qh = q_raw / n;
    return (Mat4::Identity() - qh * qh.transpose()) / n;
}

/// Spherical interpolation between two unit quaternions, shortest arc.
inline Vec4 quat_slerp(const Vec4& a, const Vec4& b_in, double u) {
    Vec4 b = b_in;
    double d = a.dot(b);
    if (d < 0) {
        b = -b;
        d = -d;
    }
    if (d > 0.9995) {
        return quat_normalized(a + u * (b - a));
    }
    double theta = std::acos(std::min(d, 1.0));
    double s = std::sin(theta);
    return (std::sin((1 - u) * theta) / s) * a + (std::sin(u * theta) / s) * b;
}

// ---------------------------------------------------------------------------
// RNG: one engine type everywhere so seeded runs are reproducible.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double mean, double sigma) {
    return std::normal_distribution<double>(mean, sigma)(rng);
}

} // namespace fxd
