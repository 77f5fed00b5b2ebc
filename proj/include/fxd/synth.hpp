#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fxd/image.hpp"
#include "fxd/scene.hpp"
#include "fxd/types.hpp"

namespace fxd {

// Procedural driving-scene benchmark: analytic surfaces (ground plane, yawed
// building boxes, poles, moving vehicle boxes), a splat field painted onto
// those surfaces, a forward-driving camera rig with laterally offset
// evaluation cameras, and a simulated spinning lidar. Everything is a pure
// function of the spec, so the same spec always produces the same dataset.

struct LidarSpec {
    int channels = 32;
    double azimuth_step_deg = 1.5;  // horizontal angular resolution
    double elevation_lo_deg = -22.0;
    double elevation_hi_deg = 3.0;
    double max_range = 30.0;
    double range_noise = 0.02;  // sigma of additive range error, meters
    double pose_jitter = 0.01;  // sigma of sensor-position error, meters
    double height = 2.0;        // sensor height above the path
};

// Static axis-box rotated by yaw about world z.
struct BoxSpec {
    Vec3 center = Vec3::Zero();
    Vec3 dims = Vec3::Ones();
    double yaw = 0.0;
};

// A vehicle box moving at constant speed along x, optionally drifting
// sideways by lane_shift meters (smoothstep between shift_begin/shift_end).
struct MoverSpec {
    std::string id = "car";
    Vec3 dims = Vec3(4.2, 1.9, 1.6);
    Vec3 start = Vec3::Zero();  // box center at t = 0
    double speed = 0.0;         // m/s, negative for oncoming traffic
    double lane_shift = 0.0;
    double shift_begin = 0.0;
    double shift_end = 1.0;
    Vec3 color = Vec3(0.75, 0.2, 0.2);
};

struct SceneSpec {
    std::uint64_t seed = 1;

    // Ego trajectory: constant speed, straight or constant-curvature arc.
    int frames = 30;
    double frame_dt = 0.1;
    double speed = 4.0;          // m/s
    double arc_curvature = 0.0;  // 1/m, 0 = straight

    // Camera rig: forward + two yawed in-path cameras, two eval cameras
    // offset laterally from the path.
    int image_width = 96;
    int image_height = 64;
    double focal = 70.0;
    double cam_height = 1.5;
    double cam_pitch_deg = 8.0;  // downward tilt
    double side_yaw_deg = 35.0;
    double eval_offset = 3.0;  // meters, applied at +y (left) and -y (right)

    // Layout.
    double ground_x0 = -6.0, ground_x1 = 38.0;
    double ground_y0 = -7.5, ground_y1 = 7.5;
    std::vector<BoxSpec> buildings;
    std::vector<BoxSpec> poles;
    std::vector<MoverSpec> movers;

    // Splat field painted on the surfaces.
    double splat_step = 0.18;        // grid spacing, meters
    double splat_aspect = 0.55;      // tangent sigma = aspect * step
    double splat_normal_frac = 0.1;  // normal sigma = frac * step
    double splat_opacity = 0.95;

    LidarSpec lidar;
    Vec3 background = Vec3(0.62, 0.72, 0.85);  // sky color behind the field
};

SceneSpec default_spec();
// Variant with close-range poles and wall slabs so that small lateral view
// shifts produce large disocclusions.
SceneSpec occlusion_heavy_spec();

// Ego path (box centers at ground level) and heading at time t.
Vec3 path_position(const SceneSpec& spec, double t);
double path_heading(const SceneSpec& spec, double t);

// Rig camera indices, in the order they appear per frame.
enum RigCamera { kCamFront = 0, kCamLeft, kCamRight, kCamEvalLeft, kCamEvalRight };
inline constexpr int kRigCameraCount = 5;
const char* rig_camera_name(int cam);
bool rig_camera_is_eval(int cam);
CameraView rig_view(const SceneSpec& spec, int cam, int frame);

// Analytic surface set used for lidar ray casting and exact depth maps.
struct AnalyticWorld {
    const SceneSpec* spec = nullptr;
    struct OrientedBox {
        Vec3 center;
        Vec3 dims;
        double yaw;
    };
    std::vector<OrientedBox> statics;  // buildings then poles
};

struct RayHit {
    double distance = 0.0;  // along the (unit) ray direction
    int object_index = -1;  // index into movers, -1 for static geometry
};

AnalyticWorld build_world(const SceneSpec& spec);
std::optional<RayHit> cast_ray(const AnalyticWorld& world, const Vec3& origin,
                               const Vec3& dir, double time);

// Mover pose (world-from-box rotation as a quaternion) at time t.
void mover_pose(const MoverSpec& m, double t, Vec4& rotation, Vec3& translation);

// Sensor-frame unit directions of one sweep, channel-major.
std::vector<Vec3> lidar_directions(const LidarSpec& lidar);
// One sweep per frame; rays are cast from a jittered sensor position but the
// returns are expressed in the nominal (recorded) sensor frame.
std::vector<LidarFrame> simulate_lidar(const SceneSpec& spec, const AnalyticWorld& world);

// Splat field + movers + rig views (frame-major: front, left, right,
// eval_left, eval_right per frame) + lidar sweeps, ready to render.
SceneGraph build_gt_scene(const SceneSpec& spec);

// Exact per-pixel camera-z of the analytic surfaces (NaN where the pixel ray
// escapes); this is what the dataset ships as ground-truth depth.
DepthMap analytic_depth(const AnalyticWorld& world, const CameraView& view, double time);

// Controlled corruptions of a scene's splat field, for probing metrics.
enum class PerturbKind { scale_depth, add_floaters, jitter_positions };
SceneGraph perturb_field(const SceneGraph& scene, PerturbKind kind, double magnitude);

// Renders images, writes exact depth maps, simulates lidar, and emits
// manifest.json + images/ + depth/ + lidar/ + scene_gt.json under out_dir.
void generate_dataset(const SceneSpec& spec, const std::filesystem::path& out_dir);

}  // namespace fxd
