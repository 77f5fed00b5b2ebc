#pragma once

#include "fxd/dynamics.hpp"
#include "fxd/types.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace fxd {

/// One anisotropic Gaussian. Parameters are stored unconstrained so
/// gradient steps never violate positivity:
///   scale = exp(log_scale), opacity = sigmoid(opacity_param).
/// For static primitives `position` is the world-frame mean; for dynamic
/// ones it holds the logistic box coordinates of the owning object.
struct GaussianPrimitive {
    Vec3 position = Vec3::Zero();
    Vec4 rotation = quat_identity(); // unit quaternion, renormalized after updates
    Vec3 log_scale = Vec3::Zero();
    double opacity_param = 0.0;
    Vec3 color0 = Vec3::Constant(0.5);
    std::vector<Vec3> color_taylor; // k-th entry: d^k color / dt^k, per second^k
    int object_index = -1;          // -1: static

    bool dynamic() const { return object_index >= 0; }
    Vec3 scale() const { return log_scale.array().exp(); }
    double opacity() const { return sigmoid(opacity_param); }
};

/// Time-evaluated color: c0 plus the Taylor tail in (t - t0), clamped to
/// [0,1] at evaluation so parameters stay unconstrained.
Vec3 color_at_time(const GaussianPrimitive& prim, double t, double t0);

/// Pinhole camera with a world->camera rigid pose. Camera frame is
/// x-right, y-down, z-forward; depth is camera-frame z. Pixel (ix, iy)
/// samples the continuous image point (ix, iy).
struct CameraView {
    std::string name;
    double fx = 1, fy = 1, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rotation = Mat3::Identity(); // world -> camera
    Vec3 translation = Vec3::Zero();
    double time = 0.0;

    Vec3 world_to_camera(const Vec3& p) const { return rotation * p + translation; }
    Vec3 camera_to_world(const Vec3& p) const {
        return rotation.transpose() * (p - translation);
    }
    Vec3 center() const { return -rotation.transpose() * translation; }

    /// (u, v) image coordinates of a camera-frame point with z > 0.
    Vec2 project_cam(const Vec3& pc) const {
        return Vec2(fx * pc[0] / pc[2] + cx, fy * pc[1] / pc[2] + cy);
    }

    /// World point of pixel (u, v) at camera depth z.
    Vec3 unproject(double u, double v, double z) const {
        Vec3 pc((u - cx) / fx * z, (v - cy) / fy * z, z);
        return camera_to_world(pc);
    }
};

/// One LiDAR sweep: points in the sensor frame plus the sensor pose.
/// Points on dynamic objects carry the object index for motion
/// compensation during accumulation.
struct LidarFrame {
    Mat3 rotation = Mat3::Identity(); // world -> sensor
    Vec3 translation = Vec3::Zero();
    double time = 0.0;
    struct Point {
        Vec3 position; // sensor frame
        int object_index = -1;
        double time = 0.0;
    };
    std::vector<Point> points;

    Vec3 sensor_center() const { return -rotation.transpose() * translation; }
    Vec3 point_to_world(const Vec3& p) const {
        return rotation.transpose() * (p - translation);
    }
};

/// The whole scene: static field, dynamic objects, and the recorded
/// camera/LiDAR trajectories. Immutable during rendering; the trainer
/// mutates it only between render passes.
struct SceneGraph {
    std::vector<GaussianPrimitive> primitives;
    std::vector<DynamicObject> objects;
    std::vector<CameraView> cameras;
    std::vector<LidarFrame> lidar;
    int taylor_order = 2;
    double color_t0 = 0.0;   // Taylor reference for static primitives
    double lidar_max_range = 30.0;

    /// Taylor reference timestamp for a primitive.
    double reference_time(const GaussianPrimitive& prim) const {
        return prim.dynamic() ? objects[prim.object_index].color_t0 : color_t0;
    }

    /// World-frame mean of a primitive at time t.
    Vec3 world_position(const GaussianPrimitive& prim, double t) const {
        if (!prim.dynamic()) return prim.position;
        const DynamicObject& obj = objects[prim.object_index];
        return to_world(box_constrain(prim.position, obj.dims), obj.pose_at(t));
    }

    /// Throws Error naming the offending entity if any invariant fails.
    void validate() const;
};

/// Scene file: JSON descriptor plus a sidecar little-endian f32 blob of
/// primitive parameters (magic "FXSP", u32 count, u32 floats-per-primitive).
/// LiDAR point payloads live in dataset files, not in the scene file;
/// the descriptor keeps the sweep poses and timestamps.
SceneGraph load_scene(const std::filesystem::path& json_path);
void save_scene(const SceneGraph& scene, const std::filesystem::path& json_path);

} // namespace fxd
