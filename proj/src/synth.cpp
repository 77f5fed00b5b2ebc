#include "fxd/synth.hpp"

#include "fxd/dataset.hpp"
#include "fxd/parallel.hpp"
#include "fxd/rasterizer.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace fxd {

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg(double d) { return d * kPi / 180.0; }

Mat3 rot_z(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return m;
}

// World frame is x-forward / y-left / z-up; camera frame is x-right /
// y-down / z-forward. world->camera for heading yaw (about world z) and a
// downward pitch about the camera's x axis.
Mat3 camera_rotation(double yaw, double pitch_down) {
    Mat3 axes;
    axes << 0, -1, 0, 0, 0, -1, 1, 0, 0;
    double c = std::cos(pitch_down), s = std::sin(pitch_down);
    Mat3 pitch;
    pitch << 1, 0, 0, 0, c, -s, 0, s, c;
    return pitch * axes * rot_z(-yaw);
}

double smoothstep01(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

Vec3 clamp_color(const Vec3& c) { return c.cwiseMax(0.03).cwiseMin(0.97); }

Vec3 mix(const Vec3& a, const Vec3& b, double w) { return a + w * (b - a); }

// Entry distance of a ray into a centered axis box, in the box frame.
std::optional<double> box_entry(const Vec3& o, const Vec3& d, const Vec3& half) {
    double tmin = 1e-6, tmax = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        if (std::abs(d[k]) < 1e-12) {
            if (std::abs(o[k]) > half[k]) return std::nullopt;
            continue;
        }
        double t1 = (-half[k] - o[k]) / d[k];
        double t2 = (half[k] - o[k]) / d[k];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
        if (tmin > tmax) return std::nullopt;
    }
    return tmin;
}

} // namespace

SceneSpec default_spec() {
    SceneSpec spec;
    spec.buildings = {
        {Vec3(8.0, 6.6, 1.8), Vec3(7.0, 3.2, 3.6), deg(6.0)},
        {Vec3(19.0, -6.9, 2.0), Vec3(8.0, 3.4, 4.0), deg(-5.0)},
        {Vec3(27.5, 6.2, 1.6), Vec3(6.5, 3.0, 3.2), deg(-8.0)},
        {Vec3(34.0, -6.4, 1.9), Vec3(6.0, 3.2, 3.8), deg(4.0)},
    };
    spec.poles = {
        {Vec3(5.0, 4.2, 2.25), Vec3(0.18, 0.18, 4.5), 0.0},
        {Vec3(13.0, -4.3, 2.25), Vec3(0.18, 0.18, 4.5), 0.0},
        {Vec3(21.0, 4.1, 2.25), Vec3(0.18, 0.18, 4.5), 0.0},
        {Vec3(29.0, -4.2, 2.25), Vec3(0.18, 0.18, 4.5), 0.0},
    };
    MoverSpec lead;
    lead.id = "lead_car";
    lead.start = Vec3(14.0, 2.1, 0.8);
    lead.speed = 2.5;
    lead.lane_shift = -1.3; // cuts in toward the ego lane
    lead.shift_begin = 0.8;
    lead.shift_end = 2.0;
    lead.color = Vec3(0.75, 0.22, 0.18);
    MoverSpec oncoming;
    oncoming.id = "oncoming_car";
    oncoming.start = Vec3(32.0, -2.3, 0.8);
    oncoming.speed = -5.0;
    oncoming.color = Vec3(0.2, 0.3, 0.72);
    spec.movers = {lead, oncoming};
    return spec;
}

SceneSpec occlusion_heavy_spec() {
    SceneSpec spec;
    spec.seed = 9;
    spec.frames = 12;
    spec.speed = 3.0;
    spec.ground_x1 = 30.0;
    // Wall slabs and a dense pole row close to the path: a small lateral
    // move uncovers large hidden regions behind them.
    spec.buildings = {
        {Vec3(7.0, 3.4, 1.4), Vec3(3.2, 0.4, 2.8), deg(4.0)},
        {Vec3(12.5, -3.2, 1.3), Vec3(3.0, 0.4, 2.6), deg(-6.0)},
        {Vec3(17.5, 3.1, 1.5), Vec3(3.2, 0.4, 3.0), deg(7.0)},
        {Vec3(23.0, -3.4, 1.4), Vec3(3.0, 0.4, 2.8), deg(-4.0)},
        {Vec3(27.0, 6.5, 1.8), Vec3(6.0, 3.0, 3.6), 0.0},
    };
    spec.poles = {
        {Vec3(4.0, -2.6, 1.9), Vec3(0.22, 0.22, 3.8), 0.0},
        {Vec3(9.5, 2.5, 1.9), Vec3(0.22, 0.22, 3.8), 0.0},
        {Vec3(15.0, -2.4, 1.9), Vec3(0.22, 0.22, 3.8), 0.0},
        {Vec3(20.5, 2.6, 1.9), Vec3(0.22, 0.22, 3.8), 0.0},
        {Vec3(25.5, -2.7, 1.9), Vec3(0.22, 0.22, 3.8), 0.0},
    };
    MoverSpec cross;
    cross.id = "passing_car";
    cross.start = Vec3(16.0, 1.9, 0.8);
    cross.speed = 1.5;
    cross.color = Vec3(0.78, 0.55, 0.15);
    spec.movers = {cross};
    return spec;
}

Vec3 path_position(const SceneSpec& spec, double t) {
    double s = spec.speed * t;
    if (spec.arc_curvature == 0.0) return Vec3(s, 0.0, 0.0);
    double r = 1.0 / spec.arc_curvature;
    double a = s * spec.arc_curvature;
    return Vec3(r * std::sin(a), r * (1.0 - std::cos(a)), 0.0);
}

double path_heading(const SceneSpec& spec, double t) {
    return spec.speed * t * spec.arc_curvature;
}

const char* rig_camera_name(int cam) {
    switch (cam) {
        case kCamFront: return "front";
        case kCamLeft: return "left";
        case kCamRight: return "right";
        case kCamEvalLeft: return "eval_left";
        case kCamEvalRight: return "eval_right";
    }
    throw Error("rig camera index out of range: " + std::to_string(cam));
}

bool rig_camera_is_eval(int cam) { return cam == kCamEvalLeft || cam == kCamEvalRight; }

CameraView rig_view(const SceneSpec& spec, int cam, int frame) {
    double t = frame * spec.frame_dt;
    double heading = path_heading(spec, t);
    Vec3 left(-std::sin(heading), std::cos(heading), 0.0);
    Vec3 center = path_position(spec, t) + Vec3(0, 0, spec.cam_height);
    double yaw = heading;
    if (cam == kCamLeft) yaw += deg(spec.side_yaw_deg);
    if (cam == kCamRight) yaw -= deg(spec.side_yaw_deg);
    if (cam == kCamEvalLeft) center += spec.eval_offset * left;
    if (cam == kCamEvalRight) center -= spec.eval_offset * left;

    CameraView view;
    view.name = rig_camera_name(cam);
    view.fx = view.fy = spec.focal;
    view.width = spec.image_width;
    view.height = spec.image_height;
    view.cx = (spec.image_width - 1) / 2.0;
    view.cy = (spec.image_height - 1) / 2.0;
    view.rotation = camera_rotation(yaw, deg(spec.cam_pitch_deg));
    view.translation = -view.rotation * center;
    view.time = t;
    return view;
}

void mover_pose(const MoverSpec& m, double t, Vec4& rotation, Vec3& translation) {
    double span = m.shift_end - m.shift_begin;
    double u = (span > 0 && m.lane_shift != 0.0)
                   ? std::clamp((t - m.shift_begin) / span, 0.0, 1.0)
                   : 0.0;
    double lateral = m.lane_shift * smoothstep01(u);
    double lateral_rate =
        (u > 0.0 && u < 1.0) ? m.lane_shift * 6.0 * u * (1.0 - u) / span : 0.0;
    translation = Vec3(m.start[0] + m.speed * t, m.start[1] + lateral, m.start[2]);
    double heading = std::atan2(lateral_rate, m.speed);
    rotation = Vec4(std::cos(heading / 2), 0, 0, std::sin(heading / 2));
}

AnalyticWorld build_world(const SceneSpec& spec) {
    AnalyticWorld world;
    world.spec = &spec;
    for (const BoxSpec& b : spec.buildings) world.statics.push_back({b.center, b.dims, b.yaw});
    for (const BoxSpec& p : spec.poles) world.statics.push_back({p.center, p.dims, p.yaw});
    return world;
}

std::optional<RayHit> cast_ray(const AnalyticWorld& world, const Vec3& origin,
                               const Vec3& dir, double time) {
    const SceneSpec& spec = *world.spec;
    double best = std::numeric_limits<double>::infinity();
    int best_obj = -1;

    if (std::abs(dir[2]) > 1e-12) {
        double t = -origin[2] / dir[2];
        if (t > 1e-6) {
            Vec3 p = origin + t * dir;
            if (p[0] >= spec.ground_x0 && p[0] <= spec.ground_x1 && p[1] >= spec.ground_y0 &&
                p[1] <= spec.ground_y1)
                best = t;
        }
    }
    for (const AnalyticWorld::OrientedBox& box : world.statics) {
        Mat3 r = rot_z(-box.yaw);
        auto t = box_entry(r * (origin - box.center), r * dir, 0.5 * box.dims);
        if (t && *t < best) best = *t;
    }
    for (size_t i = 0; i < spec.movers.size(); ++i) {
        Vec4 q;
        Vec3 c;
        mover_pose(spec.movers[i], time, q, c);
        Mat3 r = quat_to_mat(q).transpose();
        auto t = box_entry(r * (origin - c), r * dir, 0.5 * spec.movers[i].dims);
        if (t && *t < best) {
            best = *t;
            best_obj = static_cast<int>(i);
        }
    }
    if (!std::isfinite(best)) return std::nullopt;
    return RayHit{best, best_obj};
}

std::vector<Vec3> lidar_directions(const LidarSpec& lidar) {
    std::vector<Vec3> dirs;
    int az_count = std::max(1, static_cast<int>(std::lround(360.0 / lidar.azimuth_step_deg)));
    for (int c = 0; c < lidar.channels; ++c) {
        double frac = lidar.channels > 1 ? c / double(lidar.channels - 1) : 0.0;
        double el = deg(lidar.elevation_lo_deg +
                        frac * (lidar.elevation_hi_deg - lidar.elevation_lo_deg));
        for (int a = 0; a < az_count; ++a) {
            double az = 2.0 * kPi * a / az_count;
            dirs.emplace_back(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                              std::sin(el));
        }
    }
    return dirs;
}

std::vector<LidarFrame> simulate_lidar(const SceneSpec& spec, const AnalyticWorld& world) {
    std::vector<Vec3> dirs = lidar_directions(spec.lidar);
    std::vector<LidarFrame> frames(std::max(spec.frames, 0));
    parallel_blocks(spec.frames, [&](int, int begin, int end) {
        for (int f = begin; f < end; ++f) {
            double t = f * spec.frame_dt;
            Vec3 center = path_position(spec, t) + Vec3(0, 0, spec.lidar.height);
            Mat3 rot = rot_z(-path_heading(spec, t));
            LidarFrame& frame = frames[f];
            frame.rotation = rot;
            frame.translation = -rot * center;
            frame.time = t;

            Rng rng(spec.seed ^ (0x9e3779b97f4a7c15ULL * (f + 1)));
            Vec3 cast_center = center;
            if (spec.lidar.pose_jitter > 0)
                for (int k = 0; k < 3; ++k)
                    cast_center[k] += gaussian(rng, 0.0, spec.lidar.pose_jitter);
            for (const Vec3& d : dirs) {
                Vec3 world_dir = rot.transpose() * d;
                auto hit = cast_ray(world, cast_center, world_dir, t);
                if (!hit) continue;
                double range = hit->distance;
                if (spec.lidar.range_noise > 0)
                    range += gaussian(rng, 0.0, spec.lidar.range_noise);
                if (range <= 1e-3 || range > spec.lidar.max_range) continue;
                frame.points.push_back({d * range, hit->object_index, t});
            }
        }
    });
    return frames;
}

namespace {

// Seeded color palette; all surface colors are smooth functions of the
// surface point so reconstruction has texture gradients to follow.
struct Palette {
    Vec3 ground_a, ground_b;
    std::vector<Vec3> walls;
    Vec3 pole;

    explicit Palette(Rng& rng) {
        auto jitter = [&rng](const Vec3& c) {
            return Vec3(c[0] + uniform(rng, -0.04, 0.04), c[1] + uniform(rng, -0.04, 0.04),
                        c[2] + uniform(rng, -0.04, 0.04));
        };
        ground_a = jitter(Vec3(0.34, 0.34, 0.33));
        ground_b = jitter(Vec3(0.48, 0.46, 0.42));
        walls = {jitter(Vec3(0.62, 0.48, 0.34)), jitter(Vec3(0.42, 0.52, 0.58)),
                 jitter(Vec3(0.58, 0.58, 0.46)), jitter(Vec3(0.50, 0.38, 0.40))};
        pole = Vec3(0.22, 0.23, 0.26);
    }
};

struct FieldBuilder {
    const SceneSpec& spec;
    SceneGraph& scene;
    Rng& rng;
    Palette palette;
    double sig_t, sig_n;

    FieldBuilder(const SceneSpec& s, SceneGraph& sc, Rng& r)
        : spec(s), scene(sc), rng(r), palette(r),
          sig_t(s.splat_aspect * s.splat_step), sig_n(s.splat_normal_frac * s.splat_step) {}

    Vec3 noisy(const Vec3& c) {
        return clamp_color(Vec3(c[0] + uniform(rng, -0.02, 0.02),
                                c[1] + uniform(rng, -0.02, 0.02),
                                c[2] + uniform(rng, -0.02, 0.02)));
    }

    // One splat-covered rectangle: center, tangent frame (au, av) with half
    // extents, outward normal. For object_index >= 0 the frame is the box's
    // local frame and positions are stored as logistic box coordinates.
    template <typename ColorFn>
    void face(const Vec3& center, const Vec3& au, double hu, const Vec3& av, double hv,
              const Vec3& n, int object_index, const Vec3& box_dims, ColorFn color) {
        Mat3 frame;
        frame.col(0) = au;
        frame.col(1) = av;
        frame.col(2) = n;
        Vec4 q = quat_from_mat(frame);
        Vec3 log_scale(std::log(sig_t), std::log(sig_t), std::log(sig_n));
        double op = inverse_sigmoid(spec.splat_opacity);
        int nu = std::max(2, static_cast<int>(std::lround(2 * hu / spec.splat_step)) + 1);
        int nv = std::max(2, static_cast<int>(std::lround(2 * hv / spec.splat_step)) + 1);
        for (int i = 0; i < nu; ++i) {
            double u = -hu + 2 * hu * i / (nu - 1);
            for (int j = 0; j < nv; ++j) {
                double v = -hv + 2 * hv * j / (nv - 1);
                Vec3 p = center + u * au + v * av;
                GaussianPrimitive prim;
                prim.rotation = q;
                prim.log_scale = log_scale;
                prim.opacity_param = op;
                prim.color0 = noisy(color(u, v, p));
                prim.object_index = object_index;
                if (object_index >= 0) {
                    for (int k = 0; k < 3; ++k)
                        prim.position[k] =
                            inverse_sigmoid(0.5 + 0.98 * p[k] / box_dims[k]);
                } else {
                    prim.position = p;
                }
                scene.primitives.push_back(prim);
            }
        }
    }

    Vec3 ground_color(const Vec3& p) {
        double w = 0.5 + 0.5 * std::sin(2 * kPi * p[0] / 5.3) * std::sin(2 * kPi * p[1] / 4.1);
        Vec3 c = mix(palette.ground_a, palette.ground_b, w);
        return c * (0.9 + 0.1 * std::sin(0.31 * p[0] + 0.17 * p[1]));
    }

    void ground() {
        double hx = 0.5 * (spec.ground_x1 - spec.ground_x0);
        double hy = 0.5 * (spec.ground_y1 - spec.ground_y0);
        Vec3 c(spec.ground_x0 + hx, spec.ground_y0 + hy, 0.0);
        face(c, Vec3(1, 0, 0), hx, Vec3(0, 1, 0), hy, Vec3(0, 0, 1), -1, Vec3::Ones(),
             [this](double, double, const Vec3& p) { return ground_color(p); });
    }

    // The four side faces (skipping ones that face away from the road
    // corridor) and, when the box is low enough to be seen from the rig,
    // the top face.
    void box(const BoxSpec& b, const Vec3& base_color, bool cull_back_faces) {
        Mat3 r = rot_z(b.yaw);
        Vec3 half = 0.5 * b.dims;
        struct Side {
            Vec3 n_local, u_local, v_local;
            double hn, hu, hv;
        };
        const Side sides[4] = {
            {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), half[0], half[1], half[2]},
            {Vec3(-1, 0, 0), Vec3(0, -1, 0), Vec3(0, 0, 1), half[0], half[1], half[2]},
            {Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, 0, 1), half[1], half[0], half[2]},
            {Vec3(0, -1, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), half[1], half[0], half[2]},
        };
        for (const Side& s : sides) {
            Vec3 n = r * s.n_local;
            Vec3 center = b.center + n * s.hn;
            // A face pointing away from the corridor around y = 0 is never
            // visible from the rig; skip its splats.
            if (cull_back_faces && n[1] * (0.0 - center[1]) < -0.05) continue;
            face(center, r * s.u_local, s.hu, r * s.v_local, s.hv, n, -1, Vec3::Ones(),
                 [&](double u, double v, const Vec3&) {
                     double shade = 0.78 + 0.22 * std::sin(2 * kPi * u / 1.9);
                     double grad = 0.88 + 0.12 * std::sin(kPi * v / std::max(s.hv, 0.2));
                     return (base_color * shade * grad).eval();
                 });
        }
        double top_z = b.center[2] + half[2];
        if (top_z < spec.cam_height + 1.0 || top_z < spec.lidar.height + 0.5) {
            face(b.center + r * Vec3(0, 0, half[2]), r * Vec3(1, 0, 0), half[0],
                 r * Vec3(0, 1, 0), half[1], r * Vec3(0, 0, 1), -1, Vec3::Ones(),
                 [&](double u, double, const Vec3&) {
                     return (base_color * (0.7 + 0.1 * std::sin(2 * kPi * u / 1.3))).eval();
                 });
        }
    }

    // Mover splats live in the box-local frame so they ride the pose track.
    void mover(const MoverSpec& m, int index) {
        Vec3 half = 0.5 * m.dims;
        struct Side {
            Vec3 n, u, v;
            double hn, hu, hv;
        };
        const Side sides[5] = {
            {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), half[0], half[1], half[2]},
            {Vec3(-1, 0, 0), Vec3(0, -1, 0), Vec3(0, 0, 1), half[0], half[1], half[2]},
            {Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, 0, 1), half[1], half[0], half[2]},
            {Vec3(0, -1, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), half[1], half[0], half[2]},
            {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), half[2], half[0], half[1]},
        };
        for (const Side& s : sides)
            face(s.n * s.hn, s.u, s.hu, s.v, s.hv, s.n, index, m.dims,
                 [&](double u, double, const Vec3& p) {
                     double along = 0.75 + 0.25 * (p[0] / m.dims[0] + 0.5);
                     double band = 0.85 + 0.15 * std::sin(2 * kPi * u / 1.1);
                     return (m.color * along * band).eval();
                 });
    }
};

} // namespace

SceneGraph build_gt_scene(const SceneSpec& spec) {
    if (spec.frames <= 0) throw Error("trajectory has zero frames");
    SceneGraph scene;
    scene.taylor_order = 0;
    scene.color_t0 = 0.0;
    scene.lidar_max_range = spec.lidar.max_range;

    for (const MoverSpec& m : spec.movers) {
        DynamicObject obj;
        obj.id = m.id;
        obj.dims = m.dims;
        obj.color_t0 = 0.0;
        for (int f = 0; f < spec.frames; ++f) {
            PoseKey key;
            key.time = f * spec.frame_dt;
            mover_pose(m, key.time, key.rotation, key.translation);
            obj.track.push_back(key);
        }
        scene.objects.push_back(obj);
    }

    Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + 1);
    FieldBuilder builder(spec, scene, rng);
    builder.ground();
    for (size_t i = 0; i < spec.buildings.size(); ++i) {
        Vec3 base = builder.palette.walls[i % builder.palette.walls.size()];
        builder.box(spec.buildings[i], base, true);
    }
    for (const BoxSpec& p : spec.poles) builder.box(p, builder.palette.pole, false);
    for (size_t i = 0; i < spec.movers.size(); ++i)
        builder.mover(spec.movers[i], static_cast<int>(i));

    for (int f = 0; f < spec.frames; ++f)
        for (int c = 0; c < kRigCameraCount; ++c)
            scene.cameras.push_back(rig_view(spec, c, f));

    AnalyticWorld world = build_world(spec);
    scene.lidar = simulate_lidar(spec, world);
    scene.validate();
    return scene;
}

DepthMap analytic_depth(const AnalyticWorld& world, const CameraView& view, double time) {
    DepthMap map(view.width, view.height);
    Vec3 center = view.center();
    Mat3 cam_to_world = view.rotation.transpose();
    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            Vec3 dir_cam((x - view.cx) / view.fx, (y - view.cy) / view.fy, 1.0);
            double norm = dir_cam.norm();
            auto hit = cast_ray(world, center, cam_to_world * (dir_cam / norm), time);
            if (hit) {
                map.depth(y, x) = hit->distance / norm; // camera-frame z
                map.valid(y, x) = true;
            } else {
                map.depth(y, x) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    return map;
}

SceneGraph perturb_field(const SceneGraph& scene, PerturbKind kind, double magnitude) {
    SceneGraph out = scene;
    if (magnitude == 0.0) return out;
    switch (kind) {
        case PerturbKind::scale_depth: {
            if (scene.cameras.empty())
                throw Error("scale_depth perturbation needs at least one camera");
            if (magnitude < 0) throw Error("scale_depth magnitude must be positive");
            // Scaling radially about the first camera's center multiplies
            // every camera depth by the magnitude while leaving that view's
            // projection unchanged (footprints follow via log_scale).
            Vec3 c = scene.cameras.front().center();
            double log_m = std::log(magnitude);
            for (GaussianPrimitive& p : out.primitives) {
                if (!p.dynamic()) p.position = c + magnitude * (p.position - c);
                p.log_scale.array() += log_m;
            }
            for (DynamicObject& obj : out.objects) {
                obj.dims *= magnitude;
                for (PoseKey& key : obj.track)
                    key.translation = c + magnitude * (key.translation - c);
            }
            break;
        }
        case PerturbKind::add_floaters: {
            if (scene.cameras.empty())
                throw Error("add_floaters perturbation needs at least one camera");
            int n = static_cast<int>(std::lround(magnitude));
            const CameraView& view = scene.cameras.front();
            Rng rng(0xf10a7e5ULL ^ (0x9e3779b97f4a7c15ULL * n));
            for (int i = 0; i < n; ++i) {
                GaussianPrimitive prim;
                double u = uniform(rng, 0.0, view.width - 1.0);
                double v = uniform(rng, 0.0, view.height - 1.0);
                prim.position = view.unproject(u, v, uniform(rng, 2.0, 15.0));
                prim.log_scale = Vec3::Constant(std::log(uniform(rng, 0.1, 0.3)));
                prim.opacity_param = inverse_sigmoid(uniform(rng, 0.6, 0.9));
                prim.color0 = Vec3(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9),
                                   uniform(rng, 0.1, 0.9));
                prim.color_taylor.assign(scene.taylor_order, Vec3::Zero());
                out.primitives.push_back(prim);
            }
            break;
        }
        case PerturbKind::jitter_positions: {
            Rng rng(0x3177310b5ULL ^ static_cast<std::uint64_t>(std::llround(magnitude * 1e9)));
            for (GaussianPrimitive& p : out.primitives)
                for (int k = 0; k < 3; ++k) p.position[k] += gaussian(rng, 0.0, magnitude);
            break;
        }
    }
    return out;
}

void generate_dataset(const SceneSpec& spec, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    if (spec.frames <= 0) throw Error("trajectory has zero frames");
    SceneGraph scene = build_gt_scene(spec);
    AnalyticWorld world = build_world(spec);

    fs::create_directories(out_dir / "lidar");
    for (int c = 0; c < kRigCameraCount; ++c) {
        fs::create_directories(out_dir / "images" / rig_camera_name(c));
        fs::create_directories(out_dir / "depth" / rig_camera_name(c));
    }

    RenderConfig cfg;
    cfg.background = spec.background;
    int total = spec.frames * kRigCameraCount;
    parallel_blocks(total, [&](int, int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const CameraView& view = scene.cameras[i]; // frame-major, rig order
            const char* cam = rig_camera_name(i % kRigCameraCount);
            std::string frame = frame_name(i / kRigCameraCount);
            save_ppm(render_color(scene, view, view.time, cfg),
                     out_dir / "images" / cam / (frame + ".ppm"));
            save_fxdm(analytic_depth(world, view, view.time),
                      out_dir / "depth" / cam / (frame + ".fxdm"));
        }
    });
    for (int f = 0; f < spec.frames; ++f)
        save_lidar_points(out_dir / "lidar" / (frame_name(f) + ".bin"),
                          scene.lidar[f].points);
    save_scene(scene, out_dir / "scene_gt.json");

    json manifest;
    manifest["format"] = "fxd-dataset";
    manifest["version"] = 1;
    manifest["width"] = spec.image_width;
    manifest["height"] = spec.image_height;
    manifest["frames"] = spec.frames;
    manifest["frame_dt"] = spec.frame_dt;
    manifest["background"] = {spec.background[0], spec.background[1], spec.background[2]};
    manifest["lidar_max_range"] = spec.lidar.max_range;
    manifest["scene"] = "scene_gt.json";
    json times = json::array();
    for (int f = 0; f < spec.frames; ++f) times.push_back(f * spec.frame_dt);
    manifest["times"] = times;

    json cams = json::array();
    for (int c = 0; c < kRigCameraCount; ++c) {
        json cam;
        cam["name"] = rig_camera_name(c);
        cam["role"] = rig_camera_is_eval(c) ? "eval" : "train";
        cam["fx"] = spec.focal;
        cam["fy"] = spec.focal;
        cam["cx"] = (spec.image_width - 1) / 2.0;
        cam["cy"] = (spec.image_height - 1) / 2.0;
        cam["width"] = spec.image_width;
        cam["height"] = spec.image_height;
        json poses = json::array();
        for (int f = 0; f < spec.frames; ++f) {
            const CameraView& view = scene.cameras[f * kRigCameraCount + c];
            json pose;
            json rot = json::array();
            for (int r = 0; r < 3; ++r)
                for (int col = 0; col < 3; ++col) rot.push_back(view.rotation(r, col));
            pose["rotation"] = rot;
            pose["translation"] = {view.translation[0], view.translation[1],
                                   view.translation[2]};
            pose["time"] = view.time;
            poses.push_back(pose);
        }
        cam["poses"] = poses;
        cams.push_back(cam);
    }
    manifest["cameras"] = cams;

    json sweeps = json::array();
    for (int f = 0; f < spec.frames; ++f) {
        const LidarFrame& frame = scene.lidar[f];
        json sweep;
        json rot = json::array();
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 3; ++col) rot.push_back(frame.rotation(r, col));
        sweep["rotation"] = rot;
        sweep["translation"] = {frame.translation[0], frame.translation[1],
                                frame.translation[2]};
        sweep["time"] = frame.time;
        sweep["points"] = "lidar/" + frame_name(f) + ".bin";
        sweeps.push_back(sweep);
    }
    manifest["lidar"] = sweeps;

    json objects = json::array();
    for (const DynamicObject& obj : scene.objects) {
        json o;
        o["id"] = obj.id;
        o["dims"] = {obj.dims[0], obj.dims[1], obj.dims[2]};
        o["color_t0"] = obj.color_t0;
        json track = json::array();
        for (const PoseKey& key : obj.track) {
            json k;
            k["time"] = key.time;
            k["rotation"] = {key.rotation[0], key.rotation[1], key.rotation[2],
                             key.rotation[3]};
            k["translation"] = {key.translation[0], key.translation[1], key.translation[2]};
            track.push_back(k);
        }
        o["track"] = track;
        objects.push_back(o);
    }
    manifest["objects"] = objects;

    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw Error("cannot write " + (out_dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
}

} // namespace fxd
