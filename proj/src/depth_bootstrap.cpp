#include "fxd/depth_bootstrap.hpp"

#include <algorithm>
#include <cmath>

namespace fxd {

std::vector<WorldPoint> accumulate_lidar(const SceneGraph& scene, int first_frame,
                                         int n_frames) {
    int total = static_cast<int>(scene.lidar.size());
    if (first_frame < 0 || n_frames < 1 || first_frame + n_frames > total)
        throw Error("lidar window [" + std::to_string(first_frame) + ", " +
                    std::to_string(first_frame + n_frames) + ") outside the " +
                    std::to_string(total) + " recorded sweeps");
    double t_ref = scene.lidar[first_frame].time;

    std::vector<WorldPoint> out;
    for (int f = first_frame; f < first_frame + n_frames; ++f) {
        const LidarFrame& sweep = scene.lidar[f];
        for (const LidarFrame::Point& pt : sweep.points) {
            WorldPoint wp;
            wp.timestamp = pt.time;
            wp.object_index = pt.object_index;
            Vec3 world_obs = sweep.point_to_world(pt.position);
            if (pt.object_index < 0) {
                wp.position = world_obs;
            } else {
                const DynamicObject& obj = scene.objects[pt.object_index];
                PoseKey obs = obj.pose_at(pt.time);
                PoseKey ref = obj.pose_at(t_ref);
                Vec3 local =
                    quat_to_mat(obs.rotation).transpose() * (world_obs - obs.translation);
                wp.position = to_world(local, ref);
            }
            out.push_back(wp);
        }
    }
    return out;
}

SparseDepthMap select_sparse_depth(const std::vector<WorldPoint>& points,
                                   const CameraView& view, const DepthMap& rendered,
                                   const SelectionRules& rules) {
    SparseDepthMap out;
    out.view_name = view.name;
    out.width = view.width;
    out.height = view.height;

    // best sample per pixel; (timestamp, depth) or plain depth ordering
    std::vector<SparseSample> best(static_cast<size_t>(view.width) * view.height);
    std::vector<char> occupied(best.size(), 0);

    for (const WorldPoint& wp : points) {
        Vec3 pc = view.world_to_camera(wp.position);
        if (pc[2] <= 0.0 || pc[2] > rules.d_max) continue;
        Vec2 uv = view.project_cam(pc);
        int ix = static_cast<int>(std::lround(uv[0]));
        int iy = static_cast<int>(std::lround(uv[1]));
        if (ix < 0 || iy < 0 || ix >= view.width || iy >= view.height) continue;

        double d = pc[2];
        if (rules.use_deviation && rendered.valid(iy, ix)) {
            double dr = rendered.depth(iy, ix);
            if (std::abs(d - dr) / dr > rules.dev_threshold) continue;
        }

        size_t at = static_cast<size_t>(iy) * view.width + ix;
        bool better;
        if (!occupied[at]) {
            better = true;
        } else if (rules.prefer_timestamp) {
            better = wp.timestamp < best[at].timestamp ||
                     (wp.timestamp == best[at].timestamp && d < best[at].depth);
        } else {
            better = d < best[at].depth;
        }
        if (better) {
            best[at] = {ix, iy, d, wp.timestamp};
            occupied[at] = 1;
        }
    }

    for (size_t i = 0; i < best.size(); ++i)
        if (occupied[i]) out.samples.push_back(best[i]);
    return out;
}

std::optional<LinearRectifier> fit_rectifier(const SparseDepthMap& sparse,
                                             const DepthMap& rendered) {
    double sw = 0, swx = 0, swxx = 0, swy = 0, swxy = 0;
    int n = 0;
    for (const SparseSample& s : sparse.samples) {
        if (!rendered.valid(s.y, s.x)) continue;
        double x = rendered.depth(s.y, s.x); // D_r
        double y = s.depth;                  // D_s
        if (y <= 0) continue;
        double w = 1.0 / (y * y);
        sw += w;
        swx += w * x;
        swxx += w * x * x;
        swy += w * y;
        swxy += w * x * y;
        ++n;
    }
    if (n < 2) return std::nullopt;
    double det = sw * swxx - swx * swx;
    // relative spread test: det scales with weighted variance of D_r
    if (det <= 1e-12 * sw * swxx) return std::nullopt;
    LinearRectifier r;
    r.a = (sw * swxy - swx * swy) / det;
    r.b = (swxx * swy - swx * swxy) / det;
    if (!(r.a > 0) || !std::isfinite(r.a) || !std::isfinite(r.b)) return std::nullopt;
    r.sample_count = n;
    double resid = 0;
    for (const SparseSample& s : sparse.samples) {
        if (!rendered.valid(s.y, s.x) || s.depth <= 0) continue;
        resid += std::abs(r.apply(rendered.depth(s.y, s.x)) - s.depth) / s.depth;
    }
    r.mean_relative_residual = resid / n;
    return r;
}

DepthMap rectify(const DepthMap& rendered, const LinearRectifier& r) {
    DepthMap out = rendered;
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            if (!out.valid(y, x)) continue;
            double d = r.apply(out.depth(y, x));
            if (d > 0) {
                out.depth(y, x) = d;
            } else {
                out.depth(y, x) = 0;
                out.valid(y, x) = false;
            }
        }
    }
    return out;
}

DepthMap sparse_to_depth_map(const SparseDepthMap& sparse) {
    DepthMap out(sparse.width, sparse.height);
    for (const SparseSample& s : sparse.samples) {
        out.depth(s.y, s.x) = s.depth;
        out.valid(s.y, s.x) = true;
    }
    return out;
}

namespace {

/// Accumulation window of cfg.n_frames sweeps centered on the sweep
/// closest to the view's timestamp, clamped to the recording.
void window_for_view(const SceneGraph& scene, const CameraView& view, int n_frames,
                     int& first, int& count) {
    int total = static_cast<int>(scene.lidar.size());
    if (total == 0) throw Error("scene has no lidar sweeps to accumulate");
    int nearest = 0;
    double best = std::abs(scene.lidar[0].time - view.time);
    for (int f = 1; f < total; ++f) {
        double dt = std::abs(scene.lidar[f].time - view.time);
        if (dt < best) {
            best = dt;
            nearest = f;
        }
    }
    count = std::min(n_frames, total);
    first = std::clamp(nearest - count / 2, 0, total - count);
}

} // namespace

BootstrapView bootstrap_view(const SceneGraph& scene, const CameraView& view,
                             const DepthMap& rendered, const BootstrapConfig& cfg,
                             const LinearRectifier& previous) {
    int first = 0, count = 0;
    window_for_view(scene, view, cfg.n_frames, first, count);
    std::vector<WorldPoint> points = accumulate_lidar(scene, first, count);

    BootstrapView out;
    out.sparse = select_sparse_depth(points, view, rendered, cfg.rules);
    if (!cfg.rectification) {
        out.used = LinearRectifier{};
        out.supervision = sparse_to_depth_map(out.sparse);
        return out;
    }
    out.fit = fit_rectifier(out.sparse, rendered);
    out.degenerate = !out.fit.has_value();
    out.used = out.fit.value_or(previous);
    out.supervision = rectify(rendered, out.used);
    return out;
}

std::vector<BootstrapView> bootstrap_step(const SceneGraph& scene,
                                          const std::vector<int>& camera_indices,
                                          const BootstrapConfig& cfg,
                                          std::vector<LinearRectifier>& rectifiers) {
    rectifiers.resize(std::max(rectifiers.size(), camera_indices.size()));
    std::vector<BootstrapView> out;
    out.reserve(camera_indices.size());
    for (size_t i = 0; i < camera_indices.size(); ++i) {
        const CameraView& view = scene.cameras.at(camera_indices[i]);
        DepthMap rendered = render_depth(scene, view, view.time, cfg.render);
        out.push_back(bootstrap_view(scene, view, rendered, cfg, rectifiers[i]));
        rectifiers[i] = out.back().used;
    }
    return out;
}

} // namespace fxd
