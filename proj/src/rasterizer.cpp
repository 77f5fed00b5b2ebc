#include "fxd/rasterizer.hpp"

#include "fxd/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fxd {

WorldGaussian evaluate_world(const SceneGraph& scene, const GaussianPrimitive& prim,
                             double t) {
    WorldGaussian wg;
    wg.scale = prim.scale();
    wg.opacity = prim.opacity();
    Mat3 rot_q = quat_to_mat(prim.rotation);

    if (prim.dynamic()) {
        const DynamicObject& obj = scene.objects[prim.object_index];
        PoseKey pose = obj.pose_at(t);
        obj.bracket(t, wg.pose_lo, wg.pose_hi, wg.pose_u);
        wg.rot_obj = quat_to_mat(pose.rotation);
        wg.local = box_constrain(prim.position, obj.dims);
        wg.mean = wg.rot_obj * wg.local + pose.translation;
        wg.rot_eff = wg.rot_obj * rot_q;
    } else {
        wg.rot_obj = Mat3::Identity();
        wg.local = Vec3::Zero();
        wg.mean = prim.position;
        wg.rot_eff = rot_q;
    }

    wg.dt = t - scene.reference_time(prim);
    Vec3 c = prim.color0;
    double pow_term = 1.0;
    double factorial = 1.0;
    for (size_t k = 0; k < prim.color_taylor.size(); ++k) {
        pow_term *= wg.dt;
        factorial *= static_cast<double>(k + 1);
        c += prim.color_taylor[k] * (pow_term / factorial);
    }
    wg.color_pre_clamp = c;
    wg.color = c.cwiseMax(0.0).cwiseMin(1.0);
    return wg;
}

EwaJacobian ewa_jacobian(const CameraView& view, const Vec3& pc) {
    double z = pc[2];
    double limx = 1.3 * (0.5 * view.width) / view.fx;
    double limy = 1.3 * (0.5 * view.height) / view.fy;
    EwaJacobian out;
    double rx = pc[0] / z, ry = pc[1] / z;
    out.clamped_x = std::abs(rx) > limx;
    out.clamped_y = std::abs(ry) > limy;
    out.tx = out.clamped_x ? std::copysign(limx, rx) * z : pc[0];
    out.ty = out.clamped_y ? std::copysign(limy, ry) * z : pc[1];
    out.J << view.fx / z, 0.0, -view.fx * out.tx / (z * z),
        0.0, view.fy / z, -view.fy * out.ty / (z * z);
    return out;
}

std::optional<ProjectedGaussian> project_gaussian(const WorldGaussian& wg,
                                                  const CameraView& view,
                                                  const RenderConfig& cfg,
                                                  bool keep_offscreen) {
    Vec3 pc = view.world_to_camera(wg.mean);
    if (pc[2] <= cfg.near_plane) return std::nullopt;

    ProjectedGaussian pg;
    pg.mean2d = view.project_cam(pc);
    pg.depth = pc[2];
    pg.opacity = wg.opacity;
    pg.color = wg.color;

    Mat3 sigma_world =
        wg.rot_eff * wg.scale.array().square().matrix().asDiagonal() * wg.rot_eff.transpose();
    Mat3 sigma_cam = view.rotation * sigma_world * view.rotation.transpose();
    Eigen::Matrix<double, 2, 3> J = ewa_jacobian(view, pc).J;
    pg.cov2d = J * sigma_cam * J.transpose() + cfg.cov_floor * Mat2::Identity();
    pg.conic = pg.cov2d.inverse();

    double mid = 0.5 * (pg.cov2d(0, 0) + pg.cov2d(1, 1));
    double half = 0.5 * (pg.cov2d(0, 0) - pg.cov2d(1, 1));
    double lambda_max = mid + std::sqrt(half * half + pg.cov2d(0, 1) * pg.cov2d(0, 1));
    pg.radius = 3.0 * std::sqrt(std::max(lambda_max, 0.0));

    if (!keep_offscreen) {
        if (pg.mean2d[0] + pg.radius < -0.5 || pg.mean2d[0] - pg.radius > view.width - 0.5 ||
            pg.mean2d[1] + pg.radius < -0.5 || pg.mean2d[1] - pg.radius > view.height - 0.5)
            return std::nullopt;
    }
    return pg;
}

std::optional<ProjectedGaussian> project(const SceneGraph& scene,
                                         const GaussianPrimitive& prim,
                                         const CameraView& view, double t,
                                         const RenderConfig& cfg) {
    return project_gaussian(evaluate_world(scene, prim, t), view, cfg);
}

ViewProjection project_view(const SceneGraph& scene, const CameraView& view, double t,
                            const RenderConfig& cfg, bool keep_offscreen) {
    ViewProjection proj;
    proj.view = view;
    proj.time = t;
    proj.cfg = cfg;
    proj.sorted.reserve(scene.primitives.size());
    proj.world.reserve(scene.primitives.size());
    for (size_t i = 0; i < scene.primitives.size(); ++i) {
        WorldGaussian wg = evaluate_world(scene, scene.primitives[i], t);
        std::optional<ProjectedGaussian> pg = project_gaussian(wg, view, cfg, keep_offscreen);
        if (!pg) continue;
        pg->prim_index = static_cast<int>(i);
        proj.sorted.push_back(*pg);
        proj.world.push_back(wg);
    }
    // Stable sort on depth: entries were pushed in primitive order, so ties
    // resolve by index and the order is reproducible.
    std::vector<int> order(proj.sorted.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return proj.sorted[a].depth < proj.sorted[b].depth;
    });
    std::vector<ProjectedGaussian> sorted_pg(order.size());
    std::vector<WorldGaussian> sorted_wg(order.size());
    for (size_t i = 0; i < order.size(); ++i) {
        sorted_pg[i] = proj.sorted[order[i]];
        sorted_wg[i] = proj.world[order[i]];
    }
    proj.sorted = std::move(sorted_pg);
    proj.world = std::move(sorted_wg);
    return proj;
}

const std::vector<int>& TileIndex::bin_at(double u, double v) const {
    static const std::vector<int> empty;
    int tx = static_cast<int>(std::floor((u - x0) / tile));
    int ty = static_cast<int>(std::floor((v - y0) / tile));
    if (tx < 0 || ty < 0 || tx >= tiles_x || ty >= tiles_y) return empty;
    return bins[static_cast<size_t>(ty) * tiles_x + tx];
}

TileIndex ViewProjection::make_tiles(double x0, double y0, double x1, double y1) const {
    TileIndex idx;
    idx.x0 = x0;
    idx.y0 = y0;
    idx.tiles_x = std::max(1, static_cast<int>(std::ceil((x1 - x0) / idx.tile)));
    idx.tiles_y = std::max(1, static_cast<int>(std::ceil((y1 - y0) / idx.tile)));
    idx.bins.resize(static_cast<size_t>(idx.tiles_x) * idx.tiles_y);
    for (size_t i = 0; i < sorted.size(); ++i) {
        const ProjectedGaussian& pg = sorted[i];
        int tx_lo = static_cast<int>(std::floor((pg.mean2d[0] - pg.radius - x0) / idx.tile));
        int tx_hi = static_cast<int>(std::floor((pg.mean2d[0] + pg.radius - x0) / idx.tile));
        int ty_lo = static_cast<int>(std::floor((pg.mean2d[1] - pg.radius - y0) / idx.tile));
        int ty_hi = static_cast<int>(std::floor((pg.mean2d[1] + pg.radius - y0) / idx.tile));
        tx_lo = std::max(tx_lo, 0);
        ty_lo = std::max(ty_lo, 0);
        tx_hi = std::min(tx_hi, idx.tiles_x - 1);
        ty_hi = std::min(ty_hi, idx.tiles_y - 1);
        for (int ty = ty_lo; ty <= ty_hi; ++ty)
            for (int tx = tx_lo; tx <= tx_hi; ++tx)
                idx.bins[static_cast<size_t>(ty) * idx.tiles_x + tx].push_back(
                    static_cast<int>(i));
    }
    return idx;
}

TileIndex ViewProjection::image_tiles() const {
    return make_tiles(-0.5, -0.5, view.width - 0.5, view.height - 0.5);
}

BlendResult blend_at(const ViewProjection& proj, const TileIndex& tiles, double u,
                     double v, const std::optional<double>& d0, double beta) {
    const RenderConfig& cfg = proj.cfg;
    BlendResult out;
    double T = 1.0;
    for (int idx : tiles.bin_at(u, v)) {
        const ProjectedGaussian& pg = proj.sorted[idx];
        if (d0 && !(pg.depth > beta * *d0)) continue;
        Vec2 delta(u - pg.mean2d[0], v - pg.mean2d[1]);
        double maha2 = delta.dot(pg.conic * delta);
        if (maha2 > cfg.cutoff_mahalanobis2) continue;
        double alpha = std::min(pg.opacity * std::exp(-0.5 * maha2), cfg.alpha_clip);
        double w = alpha * T;
        out.color_sum += w * pg.color;
        out.depth_sum += w * pg.depth;
        out.weight += w;
        T *= 1.0 - alpha;
        if (T < cfg.transmittance_floor) break;
    }
    out.t_residual = T;
    return out;
}

RenderResult render_full(const ViewProjection& proj) {
    const CameraView& view = proj.view;
    RenderResult rr;
    rr.color = ImageBuffer(view.width, view.height, proj.cfg.background);
    rr.depth = DepthMap(view.width, view.height);
    rr.weight = ArrayXX::Zero(view.height, view.width);
    rr.depth_sum = ArrayXX::Zero(view.height, view.width);
    rr.t_residual = ArrayXX::Ones(view.height, view.width);

    TileIndex tiles = proj.image_tiles();
    parallel_blocks(view.height, [&](int, int y_begin, int y_end) {
        for (int y = y_begin; y < y_end; ++y) {
            for (int x = 0; x < view.width; ++x) {
                BlendResult b = blend_at(proj, tiles, x, y, std::nullopt, 0.0);
                rr.color.set_pixel(x, y, b.composite(proj.cfg.background));
                rr.weight(y, x) = b.weight;
                rr.depth_sum(y, x) = b.depth_sum;
                rr.t_residual(y, x) = b.t_residual;
                if (b.weight >= proj.cfg.min_hit_weight) {
                    rr.depth.depth(y, x) = b.depth_sum / b.weight;
                    rr.depth.valid(y, x) = true;
                }
            }
        }
    });
    return rr;
}

RenderResult render_full(const SceneGraph& scene, const CameraView& view, double t,
                         const RenderConfig& cfg) {
    return render_full(project_view(scene, view, t, cfg));
}

ImageBuffer render_color(const SceneGraph& scene, const CameraView& view, double t,
                         const RenderConfig& cfg) {
    return render_full(scene, view, t, cfg).color;
}

DepthMap render_depth(const SceneGraph& scene, const CameraView& view, double t,
                      const RenderConfig& cfg) {
    return render_full(scene, view, t, cfg).depth;
}

std::pair<Vec3, bool> render_ray_limited(const SceneGraph& scene, const CameraView& view,
                                         const RaySample& ray, double t, double beta,
                                         const RenderConfig& cfg) {
    if ((ray.origin - view.center()).norm() > 1e-9)
        throw Error("ray origin does not coincide with the camera center");
    Vec3 dir_cam = view.rotation * ray.direction;
    if (dir_cam[2] <= 0.0)
        throw Error("ray points away from the camera's forward axis");
    double u = view.fx * dir_cam[0] / dir_cam[2] + view.cx;
    double v = view.fy * dir_cam[1] / dir_cam[2] + view.cy;

    ViewProjection proj = project_view(scene, view, t, cfg, /*keep_offscreen=*/true);
    TileIndex tiles = proj.make_tiles(u - 0.5, v - 0.5, u + 0.5, v + 0.5);
    BlendResult b = blend_at(proj, tiles, u, v, ray.d0, beta);
    return {b.composite(cfg.background), b.weight >= cfg.min_hit_weight};
}

} // namespace fxd
