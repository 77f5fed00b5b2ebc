#include "fxd/ivw.hpp"

#include "fxd/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fxd {

WarpMap build_warp_map(const CameraView& v_in, const CameraView& v_out,
                       const DepthMap& depth, double near_plane) {
    if (depth.width != v_in.width || depth.height != v_in.height)
        throw Error("warp depth map does not match the source view size");
    WarpMap warp;
    warp.v_in = v_in;
    warp.v_out = v_out;
    warp.width = v_in.width;
    warp.height = v_in.height;
    warp.entries.resize(static_cast<size_t>(warp.width) * warp.height);

    Vec3 center = v_out.center();
    for (int y = 0; y < warp.height; ++y) {
        for (int x = 0; x < warp.width; ++x) {
            WarpMap::Entry& e = warp.at(x, y);
            e.source_valid = depth.valid(y, x);
            if (!e.source_valid) continue;
            e.point = v_in.unproject(x, y, depth.depth(y, x));
            Vec3 pc = v_out.world_to_camera(e.point);
            e.d0 = pc[2];
            e.in_frustum = pc[2] > near_plane;
            if (!e.in_frustum) continue;
            e.direction = (e.point - center).normalized();
            Vec2 uv = v_out.project_cam(pc);
            e.u = uv[0];
            e.v = uv[1];
        }
    }
    return warp;
}

TileIndex warp_tiles(const ViewProjection& proj, const WarpMap& warp) {
    const double span_cap = 4096.0;
    double x0 = warp.v_out.cx, x1 = warp.v_out.cx;
    double y0 = warp.v_out.cy, y1 = warp.v_out.cy;
    for (const WarpMap::Entry& e : warp.entries) {
        if (!e.source_valid || !e.in_frustum) continue;
        x0 = std::min(x0, e.u);
        x1 = std::max(x1, e.u);
        y0 = std::min(y0, e.v);
        y1 = std::max(y1, e.v);
    }
    x0 = std::max(x0, warp.v_out.cx - span_cap);
    x1 = std::min(x1, warp.v_out.cx + span_cap);
    y0 = std::max(y0, warp.v_out.cy - span_cap);
    y1 = std::min(y1, warp.v_out.cy + span_cap);
    return proj.make_tiles(x0 - 0.5, y0 - 0.5, x1 + 0.5, y1 + 0.5);
}

PseudoGT render_pseudo_gt(const ViewProjection& proj, const TileIndex& tiles,
                          const WarpMap& warp, double beta) {
    PseudoGT out;
    out.color = ImageBuffer(warp.width, warp.height, proj.cfg.background);
    out.mask = MaskXX::Constant(warp.height, warp.width, false);
    out.weight = ArrayXX::Zero(warp.height, warp.width);

    parallel_blocks(warp.height, [&](int, int y_begin, int y_end) {
        for (int y = y_begin; y < y_end; ++y) {
            for (int x = 0; x < warp.width; ++x) {
                const WarpMap::Entry& e = warp.at(x, y);
                if (!e.source_valid || !e.in_frustum) continue;
                BlendResult b = blend_at(proj, tiles, e.u, e.v, e.d0, beta);
                out.color.set_pixel(x, y, b.composite(proj.cfg.background));
                out.weight(y, x) = b.weight;
                out.mask(y, x) = b.weight >= proj.cfg.min_hit_weight;
            }
        }
    });
    return out;
}

PseudoGT render_pseudo_gt(const SceneGraph& scene, const WarpMap& warp, double t_out,
                          double beta, const RenderConfig& cfg) {
    ViewProjection proj =
        project_view(scene, warp.v_out, t_out, cfg, /*keep_offscreen=*/true);
    TileIndex tiles = warp_tiles(proj, warp);
    return render_pseudo_gt(proj, tiles, warp, beta);
}

} // namespace fxd
