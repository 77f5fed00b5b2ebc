#include "fxd/trainer.hpp"

#include "fxd/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace fxd {

CameraView sample_out_of_path(const CameraView& v_in, const SampleBox& box, Rng& rng) {
    Vec3 off = Vec3::Zero();
    for (int k = 0; k < 3; ++k)
        if (box.half[k] > 0.0) off[k] = uniform(rng, -box.half[k], box.half[k]);
    CameraView v = v_in;
    v.translation = v_in.translation - v_in.rotation * (box.axes * off);
    return v;
}

SampleBox path_sample_box(const Dataset& data, int frame, double lateral,
                          double vertical) {
    std::vector<std::string> names = data.camera_names("train");
    if (names.empty()) throw Error("dataset has no cameras with role 'train'");
    const DatasetCamera& ref = data.train_camera(names.front());
    if (frame < 0 || frame >= static_cast<int>(ref.frames.size()))
        throw Error("path frame " + std::to_string(frame) + " outside the trajectory");

    Vec3 forward;
    if (frame + 1 < static_cast<int>(ref.frames.size()))
        forward = ref.frames[frame + 1].center() - ref.frames[frame].center();
    else if (frame > 0)
        forward = ref.frames[frame].center() - ref.frames[frame - 1].center();
    else
        forward = ref.frames[frame].rotation.row(2).transpose(); // optical axis
    forward[2] = 0.0;
    if (forward.norm() < 1e-9) forward = Vec3(1, 0, 0);
    forward.normalize();

    SampleBox box;
    Vec3 up(0, 0, 1);
    box.axes.col(0) = forward;
    box.axes.col(1) = up.cross(forward).normalized();
    box.axes.col(2) = up;
    box.half = Vec3(0.0, lateral, vertical);
    return box;
}

std::string TrainRecord::to_json() const {
    nlohmann::ordered_json j;
    j["stage"] = stage;
    j["iter"] = iteration;
    j["primitives"] = primitives;
    j["loss"] = loss;
    j["rgb"] = rgb;
    j["depth_near"] = depth_near;
    j["depth_far"] = depth_far;
    j["psnr_in"] = psnr_in;
    return j.dump();
}

std::string TrainResult::log_jsonl() const {
    std::string out;
    for (const TrainRecord& r : log) {
        out += r.to_json();
        out += '\n';
    }
    return out;
}

StepResult backward(const SceneGraph& scene, const std::vector<SupervisedView>& views,
                    const LossWeights& weights, const RenderConfig& cfg) {
    StepResult out;
    out.grads = GradientSet(scene);
    bool have_psnr = false;

    for (const SupervisedView& sv : views) {
        if (!sv.target)
            throw Error("supervised view '" + sv.view.name + "' has no target image");

        if (sv.warp) {
            const WarpMap& warp = *sv.warp;
            ViewProjection proj =
                project_view(scene, warp.v_out, warp.v_out.time, cfg, true);
            TileIndex tiles = warp_tiles(proj, warp);
            PseudoGT pgt = render_pseudo_gt(proj, tiles, warp, sv.beta);
            if (pgt.mask.count() == 0) continue; // warp collapsed, nothing to supervise

            L1Grad l1 = l1_with_grad(pgt.color, *sv.target, &pgt.mask);
            SsimGrad ss = ssim_with_grad(pgt.color, *sv.target, &pgt.mask);
            out.parts.rgb += l1.value + weights.alpha_ssim * (1.0 - ss.value);

            ArrayXX gr = weights.lambda_rgb * (l1.dr - weights.alpha_ssim * ss.dr);
            ArrayXX gg = weights.lambda_rgb * (l1.dg - weights.alpha_ssim * ss.dg);
            ArrayXX gb = weights.lambda_rgb * (l1.db - weights.alpha_ssim * ss.db);
            pseudo_backward(scene, proj, tiles, warp, sv.beta, gr, gg, gb, pgt.mask,
                            out.grads);
            continue;
        }

        ViewProjection proj = project_view(scene, sv.view, sv.view.time, cfg);
        TileIndex tiles = proj.image_tiles();
        RenderResult rendered = render_full(proj);

        L1Grad l1 = l1_with_grad(rendered.color, *sv.target);
        SsimGrad ss = ssim_with_grad(rendered.color, *sv.target);
        out.parts.rgb += l1.value + weights.alpha_ssim * (1.0 - ss.value);

        ArrayXX gr = weights.lambda_rgb * (l1.dr - weights.alpha_ssim * ss.dr);
        ArrayXX gg = weights.lambda_rgb * (l1.dg - weights.alpha_ssim * ss.dg);
        ArrayXX gb = weights.lambda_rgb * (l1.db - weights.alpha_ssim * ss.db);

        ArrayXX gd;
        const ArrayXX* gd_ptr = nullptr;
        if (sv.depth_target) {
            DepthLossGrad near = depth_near_loss_grad(rendered.depth, *sv.depth_target,
                                                      weights.eps, weights.d_max);
            out.parts.near += near.value;
            gd = weights.lambda_near * near.d_depth;
            if (sv.far_pairs && !sv.far_pairs->pairs.empty()) {
                DepthLossGrad far =
                    depth_far_ranking_loss_grad(rendered.depth, *sv.far_pairs, weights.margin);
                out.parts.far += far.value;
                gd += weights.lambda_far * far.d_depth;
            }
            gd_ptr = &gd;
        }

        render_backward(scene, proj, tiles, rendered, gr, gg, gb, gd_ptr, out.grads);
        if (!have_psnr) {
            out.psnr_in = psnr(rendered.color, *sv.target);
            have_psnr = true;
        }
    }

    out.loss = total_loss(out.parts, weights);
    return out;
}

namespace {

using VoxelKey = std::array<long long, 3>;

struct VoxelAccum {
    Vec3 sum = Vec3::Zero();
    int n = 0;
};

VoxelKey voxel_key(const Vec3& p, double voxel) {
    return VoxelKey{static_cast<long long>(std::floor(p[0] / voxel)),
                    static_cast<long long>(std::floor(p[1] / voxel)),
                    static_cast<long long>(std::floor(p[2] / voxel))};
}

} // namespace

SceneGraph init_from_lidar(const Dataset& data, const TrainConfig& cfg) {
    if (data.frame_count <= 0) throw Error("dataset has no frames");
    if (data.lidar.empty()) throw Error("dataset has no lidar sweeps");

    SceneGraph scene;
    scene.objects = data.objects;
    scene.lidar = data.lidar;
    scene.taylor_order = cfg.taylor_order;
    scene.color_t0 = data.times.empty() ? 0.0 : data.times.front();

    // File rounding can push a stored return a hair past the recorded
    // range; widen the bound so the loaded sweeps stay self-consistent.
    double max_range = data.lidar_max_range;
    for (const LidarFrame& f : scene.lidar)
        for (const LidarFrame::Point& p : f.points)
            max_range = std::max(max_range, p.position.norm());
    scene.lidar_max_range = max_range;

    std::vector<std::string> names = cfg.cameras;
    if (names.empty()) names = data.camera_names("train");
    if (names.empty()) throw Error("dataset has no cameras with role 'train'");
    for (const std::string& name : names) {
        const DatasetCamera& cam = data.train_camera(name);
        for (const CameraView& v : cam.frames) scene.cameras.push_back(v);
    }

    // Voxel-average the accumulated cloud; dynamic returns collapse in
    // their box frame so a moving object still yields a crisp cluster.
    double voxel = cfg.init_voxel > 0 ? cfg.init_voxel : 0.2;
    std::map<VoxelKey, VoxelAccum> statics;
    std::vector<std::map<VoxelKey, VoxelAccum>> dynamics(scene.objects.size());
    int total = static_cast<int>(scene.lidar.size());
    int window = std::clamp(cfg.accumulation_frames, 1, total);
    for (int first = 0; first < total; first += window) {
        int count = std::min(window, total - first);
        std::vector<WorldPoint> points = accumulate_lidar(scene, first, count);
        double t_ref = scene.lidar[first].time;
        for (const WorldPoint& p : points) {
            if (p.object_index < 0) {
                VoxelAccum& a = statics[voxel_key(p.position, voxel)];
                a.sum += p.position;
                ++a.n;
            } else if (p.object_index < static_cast<int>(scene.objects.size())) {
                const DynamicObject& obj = scene.objects[p.object_index];
                PoseKey pose = obj.pose_at(t_ref);
                Vec3 local =
                    quat_to_mat(pose.rotation).transpose() * (p.position - pose.translation);
                VoxelAccum& a = dynamics[p.object_index][voxel_key(local, voxel)];
                a.sum += local;
                ++a.n;
            }
        }
    }

    // Seed colors by projecting into a few frames of the first train
    // camera, preferring the closest (least likely occluded) hit.
    const DatasetCamera& ref = data.train_camera(names.front());
    int stride = std::max(1, data.frame_count / 8);
    std::vector<int> color_frames;
    std::vector<ImageBuffer> color_images;
    for (int f = 0; f < data.frame_count; f += stride) {
        color_frames.push_back(f);
        color_images.push_back(data.image(ref.name, f));
    }
    auto seed_color = [&](const GaussianPrimitive& prim) {
        double best_z = std::numeric_limits<double>::infinity();
        Vec3 color(0.5, 0.5, 0.5);
        for (size_t k = 0; k < color_frames.size(); ++k) {
            const CameraView& view = ref.frames[color_frames[k]];
            Vec3 pc = view.world_to_camera(scene.world_position(prim, view.time));
            if (pc[2] < 0.5 || pc[2] >= best_z) continue;
            Vec2 uv = view.project_cam(pc);
            int x = static_cast<int>(std::lround(uv[0]));
            int y = static_cast<int>(std::lround(uv[1]));
            if (x < 0 || y < 0 || x >= view.width || y >= view.height) continue;
            best_z = pc[2];
            const ImageBuffer& img = color_images[k];
            color = Vec3(img.r(y, x), img.g(y, x), img.b(y, x));
        }
        return color;
    };

    GaussianPrimitive proto;
    proto.log_scale = Vec3::Constant(std::log(0.6 * voxel));
    proto.opacity_param = inverse_sigmoid(std::clamp(cfg.init_opacity, 1e-4, 1.0 - 1e-4));
    proto.color_taylor.assign(std::max(cfg.taylor_order, 0), Vec3::Zero());

    for (const auto& [key, acc] : statics) {
        GaussianPrimitive p = proto;
        p.position = acc.sum / acc.n;
        p.color0 = seed_color(p);
        scene.primitives.push_back(std::move(p));
    }
    for (size_t oi = 0; oi < dynamics.size(); ++oi) {
        const DynamicObject& obj = scene.objects[oi];
        for (const auto& [key, acc] : dynamics[oi]) {
            Vec3 local = acc.sum / acc.n;
            GaussianPrimitive p = proto;
            p.object_index = static_cast<int>(oi);
            for (int k = 0; k < 3; ++k)
                p.position[k] =
                    inverse_sigmoid(std::clamp(local[k] / obj.dims[k] + 0.5, 0.02, 0.98));
            p.color0 = seed_color(p);
            scene.primitives.push_back(std::move(p));
        }
    }
    return scene;
}

DensifyResult densify_and_prune(SceneGraph& scene, const std::vector<double>& grad_accum,
                                const TrainConfig& cfg, Rng& rng) {
    size_t n = scene.primitives.size();
    if (grad_accum.size() != n)
        throw Error("gradient accumulator does not match the primitive count");

    DensifyResult out;
    std::vector<GaussianPrimitive> kept;
    kept.reserve(n);
    std::vector<int> clone_src;
    out.parent.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const GaussianPrimitive& p = scene.primitives[i];
        if (sigmoid(p.opacity_param) < cfg.prune_opacity) {
            ++out.pruned;
            continue;
        }
        out.parent.push_back(static_cast<int>(i));
        kept.push_back(p);
        if (grad_accum[i] > cfg.densify_grad_threshold)
            clone_src.push_back(static_cast<int>(i));
    }
    out.survivors = static_cast<int>(kept.size());

    for (int i : clone_src) {
        if (static_cast<int>(kept.size()) >= cfg.max_primitives) break;
        GaussianPrimitive c = scene.primitives[i];
        Vec3 n3(gaussian(rng, 0.0, 1.0), gaussian(rng, 0.0, 1.0), gaussian(rng, 0.0, 1.0));
        Vec3 jitter = c.scale().cwiseProduct(n3);
        if (!c.dynamic()) {
            c.position += quat_to_mat(quat_normalized(c.rotation)) * jitter;
        } else {
            // Jitter in logistic space, sized so the box-space offset
            // still tracks the primitive's scale.
            const DynamicObject& obj = scene.objects[c.object_index];
            Vec3 jac = box_constrain_jacobian(c.position, obj.dims);
            for (int k = 0; k < 3; ++k) {
                double denom = std::max(jac[k], 1e-3 * obj.dims[k]);
                c.position[k] += std::clamp(jitter[k] / denom, -2.0, 2.0);
            }
        }
        out.parent.push_back(i);
        kept.push_back(std::move(c));
        ++out.cloned;
    }

    scene.primitives = std::move(kept);
    return out;
}

namespace {

struct AdamState {
    GradientSet m, v;
    int t = 0;
};

void adam_step(SceneGraph& scene, const GradientSet& g, AdamState& st,
               const TrainConfig& cfg) {
    ++st.t;
    double bc1 = 1.0 - std::pow(cfg.adam_beta1, st.t);
    double bc2 = 1.0 - std::pow(cfg.adam_beta2, st.t);
    auto upd = [&](double& p, double grad, double& m, double& v, double mult) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad * grad;
        p -= cfg.learning_rate * mult * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
    };

    int K = scene.taylor_order;
    for (size_t i = 0; i < scene.primitives.size(); ++i) {
        GaussianPrimitive& p = scene.primitives[i];
        for (int k = 0; k < 3; ++k) {
            upd(p.position[k], g.d_position[i][k], st.m.d_position[i][k],
                st.v.d_position[i][k], cfg.lr_position);
            upd(p.log_scale[k], g.d_log_scale[i][k], st.m.d_log_scale[i][k],
                st.v.d_log_scale[i][k], cfg.lr_log_scale);
            upd(p.color0[k], g.d_color0[i][k], st.m.d_color0[i][k], st.v.d_color0[i][k],
                cfg.lr_color);
        }
        for (int k = 0; k < 4; ++k)
            upd(p.rotation[k], g.d_rotation[i][k], st.m.d_rotation[i][k],
                st.v.d_rotation[i][k], cfg.lr_rotation);
        upd(p.opacity_param, g.d_opacity_param[i], st.m.d_opacity_param[i],
            st.v.d_opacity_param[i], cfg.lr_opacity);
        for (int k = 0; k < K; ++k) {
            size_t idx = i * K + k;
            for (int c = 0; c < 3; ++c)
                upd(p.color_taylor[k][c], g.d_color_taylor[idx][c],
                    st.m.d_color_taylor[idx][c], st.v.d_color_taylor[idx][c], cfg.lr_color);
        }
        p.rotation = quat_normalized(p.rotation);
    }

    if (!cfg.train_tracks) return;
    for (size_t oi = 0; oi < scene.objects.size(); ++oi) {
        DynamicObject& obj = scene.objects[oi];
        for (size_t k = 0; k < obj.track.size(); ++k) {
            PoseKey& key = obj.track[k];
            for (int c = 0; c < 4; ++c)
                upd(key.rotation[c], g.d_track_rotation[oi][k][c],
                    st.m.d_track_rotation[oi][k][c], st.v.d_track_rotation[oi][k][c],
                    cfg.lr_track);
            for (int c = 0; c < 3; ++c)
                upd(key.translation[c], g.d_track_translation[oi][k][c],
                    st.m.d_track_translation[oi][k][c], st.v.d_track_translation[oi][k][c],
                    cfg.lr_track);
            key.rotation = quat_normalized(key.rotation);
        }
    }
}

GradientSet remap_state(const GradientSet& old, const SceneGraph& scene,
                        const DensifyResult& dr) {
    GradientSet out(scene);
    int K = scene.taylor_order;
    for (int i = 0; i < dr.survivors; ++i) {
        int p = dr.parent[i];
        out.d_position[i] = old.d_position[p];
        out.d_rotation[i] = old.d_rotation[p];
        out.d_log_scale[i] = old.d_log_scale[p];
        out.d_opacity_param[i] = old.d_opacity_param[p];
        out.d_color0[i] = old.d_color0[p];
        for (int k = 0; k < K; ++k)
            out.d_color_taylor[static_cast<size_t>(i) * K + k] =
                old.d_color_taylor[static_cast<size_t>(p) * K + k];
    }
    out.d_track_rotation = old.d_track_rotation;
    out.d_track_translation = old.d_track_translation;
    return out;
}

void validate_config(const TrainConfig& cfg) {
    if (cfg.stage1_iters < 0 || cfg.stage2_iters < 0 || cfg.stage3_iters < 0)
        throw Error("stage iteration counts cannot be negative");
    if (!(cfg.beta_occ >= 0.0 && cfg.beta_occ <= 1.0))
        throw Error("beta_occ must lie in [0, 1]");
    if (cfg.learning_rate <= 0) throw Error("learning rate must be positive");
    if (cfg.densify_interval <= 0) throw Error("densify interval must be positive");
    if (cfg.bootstrap_interval_epochs <= 0)
        throw Error("bootstrap interval must be positive");
    if (cfg.accumulation_frames <= 0)
        throw Error("accumulation frame count must be positive");
    if (cfg.log_interval <= 0) throw Error("log interval must be positive");
}

} // namespace

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
    validate_config(cfg);

    TrainResult res;
    Rng rng(cfg.seed);
    SceneGraph scene = init_from_lidar(data, cfg);
    scene.validate();

    // Supervision compares against images composited on the dataset's sky
    // color, so renders must use the same background.
    RenderConfig render_cfg = cfg.render;
    render_cfg.background = data.background;

    int n_views = static_cast<int>(scene.cameras.size());
    int frames = data.frame_count;

    // Ground-truth images, aligned with the view table.
    std::vector<std::string> names = cfg.cameras;
    if (names.empty()) names = data.camera_names("train");
    std::vector<ImageBuffer> gt;
    gt.reserve(n_views);
    for (const std::string& name : names) {
        const DatasetCamera& cam = data.train_camera(name);
        for (int f = 0; f < static_cast<int>(cam.frames.size()); ++f)
            gt.push_back(data.image(name, f));
    }

    // Depth supervision state. Stage 1 pins each view to its own sweep;
    // stage 2 replaces the targets on the bootstrap schedule.
    std::vector<DepthMap> depth_target(n_views);
    std::vector<FarPairs> far_pairs(n_views);
    std::vector<LinearRectifier> rectifiers;
    std::vector<LinearRectifier> used_rect(n_views);
    std::vector<int> all_views(n_views);
    std::iota(all_views.begin(), all_views.end(), 0);

    BootstrapConfig raw_cfg;
    raw_cfg.rules.use_deviation = false;
    raw_cfg.rules.prefer_timestamp = false;
    raw_cfg.rules.d_max = cfg.rules.d_max;
    raw_cfg.rectification = false;

    auto raw_targets = [&](int n_frames) {
        BootstrapConfig bc = raw_cfg;
        bc.n_frames = std::min(n_frames, static_cast<int>(scene.lidar.size()));
        for (int vi = 0; vi < n_views; ++vi) {
            const CameraView& view = scene.cameras[vi];
            DepthMap invalid(view.width, view.height);
            depth_target[vi] =
                bootstrap_view(scene, view, invalid, bc, LinearRectifier{}).supervision;
            used_rect[vi] = LinearRectifier{};
            far_pairs[vi] = sample_far_pairs(depth_target[vi], cfg.weights.d_max,
                                             cfg.weights.n_pairs, rng);
        }
    };

    auto bootstrap_targets = [&]() {
        BootstrapConfig bc;
        bc.n_frames = std::min(cfg.accumulation_frames, static_cast<int>(scene.lidar.size()));
        bc.rules = cfg.rules;
        bc.render = render_cfg;
        bc.rectification = true;
        std::vector<BootstrapView> views = bootstrap_step(scene, all_views, bc, rectifiers);
        for (int vi = 0; vi < n_views; ++vi) {
            depth_target[vi] = std::move(views[vi].supervision);
            used_rect[vi] = views[vi].used;
            far_pairs[vi] = sample_far_pairs(depth_target[vi], cfg.weights.d_max,
                                             cfg.weights.n_pairs, rng);
        }
    };

    raw_targets(1); // warm-up: single-frame sparse depth

    AdamState adam;
    adam.m = GradientSet(scene);
    adam.v = GradientSet(scene);
    std::vector<double> grad_accum(scene.primitives.size(), 0.0);

    int n1 = cfg.stage1_iters, n2 = cfg.stage2_iters, n3 = cfg.stage3_iters;
    int total_iters = n1 + n2 + n3;
    int last_refresh = std::numeric_limits<int>::min();
    bool raw_stage2_done = false;

    for (int g = 0; g < total_iters; ++g) {
        int stage = g < n1 ? 1 : (g < n1 + n2 ? 2 : 3);

        if (stage >= 2) {
            if (cfg.use_bootstrap) {
                bool due = last_refresh == std::numeric_limits<int>::min() ||
                           g - last_refresh >= cfg.bootstrap_interval_epochs * n_views;
                if (due) {
                    bootstrap_targets();
                    last_refresh = g;
                }
            } else if (!raw_stage2_done) {
                raw_targets(cfg.accumulation_frames);
                raw_stage2_done = true;
            }
        }

        // Round-robin keeps every loss window balanced across views, so
        // the descent diagnostics are not confounded by view composition.
        int vi = g % n_views;
        const CameraView& view = scene.cameras[vi];

        std::vector<SupervisedView> batch;
        SupervisedView in_path;
        in_path.view = view;
        in_path.target = &gt[vi];
        in_path.depth_target = &depth_target[vi];
        in_path.far_pairs = &far_pairs[vi];
        batch.push_back(in_path);

        WarpMap warp;
        if (stage == 3 && cfg.use_ivw) {
            SampleBox box =
                path_sample_box(data, vi % frames, cfg.box_lateral, cfg.box_vertical);
            CameraView v_out = sample_out_of_path(view, box, rng);
            DepthMap lifted = render_depth(scene, view, view.time, render_cfg);
            if (cfg.use_bootstrap) lifted = rectify(lifted, used_rect[vi]);
            warp = build_warp_map(view, v_out, lifted, render_cfg.near_plane);
            SupervisedView out_path;
            out_path.view = v_out;
            out_path.target = &gt[vi];
            out_path.warp = &warp;
            out_path.beta = cfg.beta_occ;
            batch.push_back(out_path);
        }

        StepResult step = backward(scene, batch, cfg.weights, render_cfg);
        adam_step(scene, step.grads, adam, cfg);
        for (size_t i = 0; i < grad_accum.size(); ++i)
            grad_accum[i] += step.grads.screen_norm[i];

        if (stage == 2 && (g - n1 + 1) % cfg.densify_interval == 0 &&
            static_cast<int>(scene.primitives.size()) < cfg.max_primitives) {
            DensifyResult dr = densify_and_prune(scene, grad_accum, cfg, rng);
            if (dr.cloned > 0 || dr.pruned > 0) {
                adam.m = remap_state(adam.m, scene, dr);
                adam.v = remap_state(adam.v, scene, dr);
            }
            grad_accum.assign(scene.primitives.size(), 0.0);
        }

        if ((g + 1) % cfg.log_interval == 0 || g + 1 == total_iters) {
            TrainRecord r;
            r.stage = stage;
            r.iteration = g + 1;
            r.primitives = static_cast<int>(scene.primitives.size());
            r.loss = step.loss;
            r.rgb = step.parts.rgb;
            r.depth_near = step.parts.near;
            r.depth_far = step.parts.far;
            r.psnr_in = step.psnr_in;
            res.log.push_back(r);
        }
    }

    res.scene = std::move(scene);
    return res;
}

} // namespace fxd
