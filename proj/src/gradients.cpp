#include "fxd/gradients.hpp"

#include "fxd/parallel.hpp"

#include <cmath>

namespace fxd {

GradientSet::GradientSet(const SceneGraph& scene) {
    size_t n = scene.primitives.size();
    taylor_order = scene.taylor_order;
    d_position.assign(n, Vec3::Zero());
    d_rotation.assign(n, Vec4::Zero());
    d_log_scale.assign(n, Vec3::Zero());
    d_opacity_param.assign(n, 0.0);
    d_color0.assign(n, Vec3::Zero());
    d_color_taylor.assign(n * static_cast<size_t>(taylor_order), Vec3::Zero());
    screen_norm.assign(n, 0.0);
    d_track_rotation.resize(scene.objects.size());
    d_track_translation.resize(scene.objects.size());
    for (size_t i = 0; i < scene.objects.size(); ++i) {
        d_track_rotation[i].assign(scene.objects[i].track.size(), Vec4::Zero());
        d_track_translation[i].assign(scene.objects[i].track.size(), Vec3::Zero());
    }
}

namespace {

/// One splat actually blended during the forward replay.
struct BlendStep {
    int idx;       // into proj.sorted
    double alpha;  // after the clip
    double t_in;   // transmittance in front of this splat
    double g;      // exp(-maha2 / 2)
    Vec2 q;        // conic * delta
    bool clipped;
};

/// Replays blend_at step for step and pushes the chain rule through the
/// front-to-back recursion. Suffix sums give d/d alpha_i in one backward
/// sweep over the recorded steps.
void blend_backward_impl(const ViewProjection& proj, const TileIndex& tiles, double u,
                         double v, const std::optional<double>& d0, double beta,
                         const Vec3& g_color, double g_depth_sum, double g_weight,
                         std::vector<BlendStep>& steps, std::vector<ScreenGrad>& buf) {
    const RenderConfig& cfg = proj.cfg;
    steps.clear();
    double T = 1.0;
    for (int idx : tiles.bin_at(u, v)) {
        const ProjectedGaussian& pg = proj.sorted[idx];
        if (d0 && !(pg.depth > beta * *d0)) continue;
        Vec2 delta(u - pg.mean2d[0], v - pg.mean2d[1]);
        double maha2 = delta.dot(pg.conic * delta);
        if (maha2 > cfg.cutoff_mahalanobis2) continue;
        BlendStep s;
        s.idx = idx;
        s.g = std::exp(-0.5 * maha2);
        double raw = pg.opacity * s.g;
        s.alpha = std::min(raw, cfg.alpha_clip);
        s.t_in = T;
        s.q = pg.conic * delta;
        s.clipped = raw > cfg.alpha_clip;
        steps.push_back(s);
        T *= 1.0 - s.alpha;
        if (T < cfg.transmittance_floor) break;
    }
    double t_bg = T;
    double g_dot_bg = g_color.dot(cfg.background);

    Vec3 suffix_c = Vec3::Zero();
    double suffix_d = 0.0, suffix_w = 0.0;
    for (size_t k = steps.size(); k-- > 0;) {
        const BlendStep& s = steps[k];
        const ProjectedGaussian& pg = proj.sorted[s.idx];
        ScreenGrad& sg = buf[s.idx];
        double w = s.alpha * s.t_in;
        double inv1a = 1.0 / (1.0 - s.alpha);
        double d_alpha = g_color.dot(s.t_in * pg.color - inv1a * suffix_c) -
                         g_dot_bg * t_bg * inv1a +
                         g_depth_sum * (s.t_in * pg.depth - inv1a * suffix_d) +
                         g_weight * (s.t_in - inv1a * suffix_w);
        sg.d_color += w * g_color;
        sg.d_depth += w * g_depth_sum;
        if (!s.clipped) {
            double og = pg.opacity * s.g;
            sg.d_opacity += d_alpha * s.g;
            sg.d_mean2d += (d_alpha * og) * s.q;
            sg.d_cov2d += (0.5 * d_alpha * og) * (s.q * s.q.transpose());
        }
        suffix_c += w * pg.color;
        suffix_d += w * pg.depth;
        suffix_w += w;
    }
}

/// Chains d/d(pose rotation matrix) into the raw track quaternions,
/// replaying the interpolation branch pose_at took at this time.
void track_rotation_backward(const DynamicObject& obj, int object_index,
                             const WorldGaussian& wg, const Mat3& d_robj,
                             GradientSet& out) {
    int lo = wg.pose_lo, hi = wg.pose_hi;
    double u = wg.pose_u;
    bool endpoint = (lo == hi || u == 0.0);

    Vec4 q_t;
    if (endpoint) {
        q_t = quat_normalized(obj.track[lo].rotation);
    } else {
        q_t = quat_slerp(quat_normalized(obj.track[lo].rotation),
                         quat_normalized(obj.track[hi].rotation), u);
    }
    Mat3 dR[4];
    quat_rotation_jacobian(q_t, dR);
    Vec4 v;
    for (int k = 0; k < 4; ++k) v[k] = (dR[k].array() * d_robj.array()).sum();
    // The rotation consumes the renormalized quaternion, so only the
    // tangential component of the partial survives.
    v -= v.dot(q_t) * q_t;

    if (endpoint) {
        out.d_track_rotation[object_index][lo] +=
            quat_normalize_jacobian(obj.track[lo].rotation) * v;
        return;
    }

    Vec4 a = quat_normalized(obj.track[lo].rotation);
    Vec4 b = quat_normalized(obj.track[hi].rotation);
    double sflip = 1.0;
    double d = a.dot(b);
    if (d < 0) {
        b = -b;
        d = -d;
        sflip = -1.0;
    }
    Vec4 da, db;
    if (d > 0.9995) {
        // Short-arc fallback: normalize(a + u (b - a)).
        Vec4 m = a + u * (b - a);
        Vec4 dm = quat_normalize_jacobian(m) * v;
        da = (1.0 - u) * dm;
        db = u * dm;
    } else {
        double theta = std::acos(std::min(d, 1.0));
        double s = std::sin(theta);
        double c0 = std::sin((1.0 - u) * theta) / s;
        double c1 = std::sin(u * theta) / s;
        double dc0_dtheta =
            ((1.0 - u) * std::cos((1.0 - u) * theta) * s - std::sin((1.0 - u) * theta) * std::cos(theta)) /
            (s * s);
        double dc1_dtheta =
            (u * std::cos(u * theta) * s - std::sin(u * theta) * std::cos(theta)) / (s * s);
        double dtheta_dd = -1.0 / s;
        // d q_t / d(a.b), the only path besides the direct coefficients.
        Vec4 dcoef = (dc0_dtheta * dtheta_dd) * a + (dc1_dtheta * dtheta_dd) * b;
        double v_dot = v.dot(dcoef);
        da = c0 * v + v_dot * b;
        db = c1 * v + v_dot * a;
    }
    out.d_track_rotation[object_index][lo] +=
        quat_normalize_jacobian(obj.track[lo].rotation) * da;
    out.d_track_rotation[object_index][hi] +=
        sflip * (quat_normalize_jacobian(obj.track[hi].rotation) * db);
}

} // namespace

void blend_backward(const ViewProjection& proj, const TileIndex& tiles, double u,
                    double v, const std::optional<double>& d0, double beta,
                    const Vec3& g_color, double g_depth_sum, double g_weight,
                    std::vector<ScreenGrad>& buf) {
    std::vector<BlendStep> steps;
    blend_backward_impl(proj, tiles, u, v, d0, beta, g_color, g_depth_sum, g_weight, steps,
                        buf);
}

void unproject_screen_grads(const SceneGraph& scene, const ViewProjection& proj,
                            const std::vector<ScreenGrad>& grads, GradientSet& out) {
    if (grads.size() != proj.sorted.size())
        throw Error("screen gradient buffer does not match the projection");
    const CameraView& view = proj.view;

    for (size_t i = 0; i < grads.size(); ++i) {
        const ScreenGrad& sg = grads[i];
        if (sg.d_depth == 0.0 && sg.d_opacity == 0.0 && sg.d_color.isZero(0.0) &&
            sg.d_mean2d.isZero(0.0) && sg.d_cov2d.isZero(0.0))
            continue;
        const ProjectedGaussian& pg = proj.sorted[i];
        const WorldGaussian& wg = proj.world[i];
        const GaussianPrimitive& prim = scene.primitives[pg.prim_index];
        size_t pi = static_cast<size_t>(pg.prim_index);

        out.screen_norm[pi] += sg.d_mean2d.norm();

        // Color: the clamp gates the partial per channel.
        Vec3 masked;
        for (int k = 0; k < 3; ++k)
            masked[k] = (wg.color_pre_clamp[k] > 0.0 && wg.color_pre_clamp[k] < 1.0)
                            ? sg.d_color[k]
                            : 0.0;
        out.d_color0[pi] += masked;
        double pow_term = 1.0, factorial = 1.0;
        size_t n_taylor = std::min(prim.color_taylor.size(),
                                   static_cast<size_t>(out.taylor_order));
        for (size_t k = 0; k < n_taylor; ++k) {
            pow_term *= wg.dt;
            factorial *= static_cast<double>(k + 1);
            out.d_color_taylor[pi * out.taylor_order + k] += masked * (pow_term / factorial);
        }

        out.d_opacity_param[pi] += pg.opacity * (1.0 - pg.opacity) * sg.d_opacity;

        // Projection chain: screen mean and blended depth into the
        // camera-frame point. The mean projects exactly, so its Jacobian is
        // never frustum-clamped.
        Vec3 pc = view.world_to_camera(wg.mean);
        double z = pc[2];
        double fx = view.fx, fy = view.fy;
        Eigen::Matrix<double, 2, 3> J_mean;
        J_mean << fx / z, 0.0, -fx * pc[0] / (z * z),
            0.0, fy / z, -fy * pc[1] / (z * z);
        Vec3 d_pcam = J_mean.transpose() * sg.d_mean2d;
        d_pcam[2] += sg.d_depth;

        // Covariance chain: cov2d = J Sigma_cam J^T + floor, with J the
        // cone-limited EWA Jacobian from the forward pass. J depends on the
        // camera point, so that path feeds back into d_pcam; a clamped
        // coordinate contributes no position partial and a halved z term
        // (tx = s lim z makes J02 a function of z alone).
        Mat2 gc = 0.5 * (sg.d_cov2d + sg.d_cov2d.transpose());
        Mat3 sigma_world = wg.rot_eff * wg.scale.array().square().matrix().asDiagonal() *
                           wg.rot_eff.transpose();
        Mat3 sigma_cam = view.rotation * sigma_world * view.rotation.transpose();
        EwaJacobian ej = ewa_jacobian(view, pc);
        const Eigen::Matrix<double, 2, 3>& J = ej.J;
        Mat3 d_sigma_cam = J.transpose() * gc * J;
        Eigen::Matrix<double, 2, 3> d_j = 2.0 * gc * J * sigma_cam;
        double kx = ej.clamped_x ? 1.0 : 2.0;
        double ky = ej.clamped_y ? 1.0 : 2.0;
        if (!ej.clamped_x) d_pcam[0] += d_j(0, 2) * (-fx / (z * z));
        if (!ej.clamped_y) d_pcam[1] += d_j(1, 2) * (-fy / (z * z));
        d_pcam[2] += d_j(0, 0) * (-fx / (z * z)) + d_j(0, 2) * (kx * fx * ej.tx / (z * z * z)) +
                     d_j(1, 1) * (-fy / (z * z)) + d_j(1, 2) * (ky * fy * ej.ty / (z * z * z));

        Mat3 a_world = view.rotation.transpose() * d_sigma_cam * view.rotation;
        Vec3 d_pworld = view.rotation.transpose() * d_pcam;

        // Shape: Sigma_world = R_eff diag(s^2) R_eff^T.
        Vec3 s2 = wg.scale.array().square();
        Mat3 d_reff = 2.0 * a_world * wg.rot_eff * s2.asDiagonal();
        for (int k = 0; k < 3; ++k) {
            Vec3 r = wg.rot_eff.col(k);
            out.d_log_scale[pi][k] += 2.0 * s2[k] * r.dot(a_world * r);
        }

        Mat3 d_rq;
        if (prim.dynamic()) {
            const DynamicObject& obj = scene.objects[prim.object_index];
            Mat3 rq = quat_to_mat(prim.rotation);
            d_rq = wg.rot_obj.transpose() * d_reff;
            Mat3 d_robj = d_reff * rq.transpose() + d_pworld * wg.local.transpose();
            Vec3 d_local = wg.rot_obj.transpose() * d_pworld;
            out.d_position[pi] +=
                box_constrain_jacobian(prim.position, obj.dims).cwiseProduct(d_local);
            out.d_track_translation[prim.object_index][wg.pose_lo] +=
                (1.0 - wg.pose_u) * d_pworld;
            out.d_track_translation[prim.object_index][wg.pose_hi] += wg.pose_u * d_pworld;
            track_rotation_backward(obj, prim.object_index, wg, d_robj, out);
        } else {
            d_rq = d_reff;
            out.d_position[pi] += d_pworld;
        }

        Vec4 q_unit = quat_normalized(prim.rotation);
        Mat3 dR[4];
        quat_rotation_jacobian(q_unit, dR);
        Vec4 v;
        for (int k = 0; k < 4; ++k) v[k] = (dR[k].array() * d_rq.array()).sum();
        out.d_rotation[pi] += quat_normalize_jacobian(prim.rotation) * v;

        bool finite = out.d_position[pi].allFinite() && out.d_rotation[pi].allFinite() &&
                      out.d_log_scale[pi].allFinite() &&
                      std::isfinite(out.d_opacity_param[pi]) &&
                      out.d_color0[pi].allFinite();
        if (prim.dynamic()) {
            finite = finite &&
                     out.d_track_rotation[prim.object_index][wg.pose_lo].allFinite() &&
                     out.d_track_translation[prim.object_index][wg.pose_hi].allFinite();
        }
        if (!finite)
            throw Error("non-finite gradient for primitive " + std::to_string(pg.prim_index) +
                        " in view '" + view.name + "'");
    }
}

void render_backward(const SceneGraph& scene, const ViewProjection& proj,
                     const TileIndex& tiles, const RenderResult& rendered,
                     const ArrayXX& g_r, const ArrayXX& g_g, const ArrayXX& g_b,
                     const ArrayXX* g_depth, GradientSet& out) {
    const CameraView& view = proj.view;
    if (g_r.rows() != view.height || g_r.cols() != view.width)
        throw Error("color gradient plane does not match the view size");

    std::vector<std::vector<ScreenGrad>> bufs(std::max(1, worker_count()));
    parallel_blocks(view.height, [&](int block, int y_begin, int y_end) {
        std::vector<ScreenGrad>& buf = bufs[block];
        buf.assign(proj.sorted.size(), ScreenGrad{});
        std::vector<BlendStep> steps;
        for (int y = y_begin; y < y_end; ++y) {
            for (int x = 0; x < view.width; ++x) {
                Vec3 gc(g_r(y, x), g_g(y, x), g_b(y, x));
                double gsd = 0.0, gw = 0.0;
                if (g_depth && rendered.depth.valid(y, x) && (*g_depth)(y, x) != 0.0) {
                    // D = depth_sum / weight, so the quotient splits the
                    // incoming partial over both sums.
                    double gd = (*g_depth)(y, x);
                    double weight = rendered.weight(y, x);
                    gsd = gd / weight;
                    gw = -gd * rendered.depth.depth(y, x) / weight;
                }
                if (gc.isZero(0.0) && gsd == 0.0 && gw == 0.0) continue;
                blend_backward_impl(proj, tiles, x, y, std::nullopt, 0.0, gc, gsd, gw,
                                    steps, buf);
            }
        }
    });

    // Reduce the per-block buffers in block order so results only depend
    // on the worker count, not the scheduling.
    std::vector<ScreenGrad> total(proj.sorted.size());
    for (const std::vector<ScreenGrad>& buf : bufs) {
        if (buf.empty()) continue;
        for (size_t i = 0; i < total.size(); ++i) {
            total[i].d_mean2d += buf[i].d_mean2d;
            total[i].d_cov2d += buf[i].d_cov2d;
            total[i].d_depth += buf[i].d_depth;
            total[i].d_opacity += buf[i].d_opacity;
            total[i].d_color += buf[i].d_color;
        }
    }
    unproject_screen_grads(scene, proj, total, out);
}

void pseudo_backward(const SceneGraph& scene, const ViewProjection& proj,
                     const TileIndex& tiles, const WarpMap& warp, double beta,
                     const ArrayXX& g_r, const ArrayXX& g_g, const ArrayXX& g_b,
                     const MaskXX& mask, GradientSet& out) {
    if (g_r.rows() != warp.height || g_r.cols() != warp.width)
        throw Error("color gradient plane does not match the warp size");

    std::vector<std::vector<ScreenGrad>> bufs(std::max(1, worker_count()));
    parallel_blocks(warp.height, [&](int block, int y_begin, int y_end) {
        std::vector<ScreenGrad>& buf = bufs[block];
        buf.assign(proj.sorted.size(), ScreenGrad{});
        std::vector<BlendStep> steps;
        for (int y = y_begin; y < y_end; ++y) {
            for (int x = 0; x < warp.width; ++x) {
                if (!mask(y, x)) continue;
                const WarpMap::Entry& e = warp.at(x, y);
                if (!e.source_valid || !e.in_frustum) continue;
                Vec3 gc(g_r(y, x), g_g(y, x), g_b(y, x));
                if (gc.isZero(0.0)) continue;
                blend_backward_impl(proj, tiles, e.u, e.v, e.d0, beta, gc, 0.0, 0.0,
                                    steps, buf);
            }
        }
    });

    std::vector<ScreenGrad> total(proj.sorted.size());
    for (const std::vector<ScreenGrad>& buf : bufs) {
        if (buf.empty()) continue;
        for (size_t i = 0; i < total.size(); ++i) {
            total[i].d_mean2d += buf[i].d_mean2d;
            total[i].d_cov2d += buf[i].d_cov2d;
            total[i].d_depth += buf[i].d_depth;
            total[i].d_opacity += buf[i].d_opacity;
            total[i].d_color += buf[i].d_color;
        }
    }
    unproject_screen_grads(scene, proj, total, out);
}

} // namespace fxd
