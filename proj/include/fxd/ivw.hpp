#pragma once

#include "fxd/rasterizer.hpp"

namespace fxd {

/// Warped ray map from an in-path view to an out-of-path camera: every
/// source pixel is lifted through its (rectified) depth into the world
/// and re-aimed from the target camera. Rays whose lifted point falls
/// outside the target image bounds are kept; only points at or behind
/// the target near plane clear in_frustum.
struct WarpMap {
    CameraView v_in;
    CameraView v_out;
    int width = 0;
    int height = 0;

    struct Entry {
        Vec3 point = Vec3::Zero();     // lifted world point
        Vec3 direction = Vec3::Zero(); // unit ray from v_out's center
        double u = 0, v = 0;           // target image coords (in_frustum only)
        double d0 = 0;                 // camera-frame z of point at v_out
        bool source_valid = false;
        bool in_frustum = false;
    };
    std::vector<Entry> entries; // row-major, one per source pixel

    Entry& at(int x, int y) { return entries[static_cast<size_t>(y) * width + x]; }
    const Entry& at(int x, int y) const {
        return entries[static_cast<size_t>(y) * width + x];
    }
};

WarpMap build_warp_map(const CameraView& v_in, const CameraView& v_out,
                       const DepthMap& depth, double near_plane = RenderConfig{}.near_plane);

/// Out-of-path render rearranged into source-pixel order. A pixel enters
/// the supervision mask only when its source depth was valid, the lifted
/// point sat in front of the target camera, and the ray blend reached the
/// hit threshold.
struct PseudoGT {
    ImageBuffer color;
    MaskXX mask;
    ArrayXX weight; // accumulated blend weight per source pixel
};

PseudoGT render_pseudo_gt(const SceneGraph& scene, const WarpMap& warp, double t_out,
                          double beta, const RenderConfig& cfg = {});

/// Variant over a prebuilt projection of the target view (must have been
/// projected with keep_offscreen so out-of-boundary rays still hit).
PseudoGT render_pseudo_gt(const ViewProjection& proj, const TileIndex& tiles,
                          const WarpMap& warp, double beta);

/// Tile index sized to the warp's ray footprint in the target image plane.
/// Spans are clamped to +-4096 px around the principal point; rays aimed
/// further out than that graze the near plane and count as misses.
TileIndex warp_tiles(const ViewProjection& proj, const WarpMap& warp);

} // namespace fxd
