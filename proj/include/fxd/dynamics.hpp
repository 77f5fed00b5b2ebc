#pragma once

#include "fxd/types.hpp"

#include <string>
#include <vector>

namespace fxd {

/// Rigid pose of a dynamic object's box at one time frame. Both the
/// rotation and the translation are trainable.
struct PoseKey {
    double time = 0.0;
    Vec4 rotation = quat_identity(); // local box frame -> world
    Vec3 translation = Vec3::Zero();
};

/// Bounding-box-constrained dynamic object. Member primitives store
/// logistic coordinates that map through a sigmoid into the box, so they
/// can never leave it no matter how far the optimizer pushes them.
struct DynamicObject {
    std::string id;
    Vec3 dims = Vec3::Ones(); // (l, w, h), meters, all > 0
    std::vector<PoseKey> track; // strictly increasing time
    double color_t0 = 0.0; // Taylor expansion reference for member primitives

    /// Interpolated pose: slerp on rotation, lerp on translation; clamped
    /// outside the track's time range.
    PoseKey pose_at(double t) const;

    /// Bracketing track indices and the interpolation weight for time t.
    /// Weight 0 means lo alone, 1 means hi alone.
    void bracket(double t, int& lo, int& hi, double& u) const;
};

/// Sigmoid box map: unbounded logistic coordinates to a point strictly
/// inside the centered open box (-l/2,l/2) x (-w/2,w/2) x (-h/2,h/2).
inline Vec3 box_constrain(const Vec3& logistic, const Vec3& dims) {
    Vec3 out;
    for (int k = 0; k < 3; ++k)
        out[k] = dims[k] * (sigmoid_open(logistic[k]) - 0.5);
    return out;
}

/// Diagonal Jacobian of box_constrain.
inline Vec3 box_constrain_jacobian(const Vec3& logistic, const Vec3& dims) {
    Vec3 out;
    for (int k = 0; k < 3; ++k) {
        double s = sigmoid_open(logistic[k]);
        // Flat once the clamp engages; matches the forward map.
        double ds = (s <= 1e-7 || s >= 1.0 - 1e-7) ? 0.0 : s * (1.0 - s);
        out[k] = dims[k] * ds;
    }
    return out;
}

/// Rigid transform of a box-local point into the world frame.
inline Vec3 to_world(const Vec3& local, const PoseKey& pose) {
    return quat_to_mat(pose.rotation) * local + pose.translation;
}

} // namespace fxd
