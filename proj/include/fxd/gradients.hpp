#pragma once

#include "fxd/ivw.hpp"
#include "fxd/rasterizer.hpp"

#include <vector>

namespace fxd {

/// Partials of a scalar loss with respect to every trainable parameter,
/// laid out to mirror the scene. d_position is taken with respect to the
/// stored coordinates, so for dynamic primitives it is the partial in
/// logistic box space. Entries stay zero for primitives culled in every
/// contributing view.
struct GradientSet {
    std::vector<Vec3> d_position;
    std::vector<Vec4> d_rotation;
    std::vector<Vec3> d_log_scale;
    std::vector<double> d_opacity_param;
    std::vector<Vec3> d_color0;
    std::vector<Vec3> d_color_taylor; // primitive-major, taylor_order each
    std::vector<std::vector<Vec4>> d_track_rotation;
    std::vector<std::vector<Vec3>> d_track_translation;
    /// Accumulated screen-space position gradient norm per primitive,
    /// one summand per contributing view; drives densification.
    std::vector<double> screen_norm;
    int taylor_order = 0;

    GradientSet() = default;
    explicit GradientSet(const SceneGraph& scene);
};

/// Per-splat partials in screen space, accumulated over the pixels or
/// rays of one view. Indexed by position in ViewProjection::sorted.
struct ScreenGrad {
    Vec2 d_mean2d = Vec2::Zero();
    Mat2 d_cov2d = Mat2::Zero(); // symmetric, full-matrix convention
    double d_depth = 0.0;        // camera-frame z
    double d_opacity = 0.0;      // post-sigmoid opacity
    Vec3 d_color = Vec3::Zero(); // clamped color
};

/// Backward of one blend_at call. g_color is the partial with respect to
/// the composited color; g_depth_sum and g_weight with respect to the raw
/// blend sums. Replays the forward walk, so skipped splats (depth filter,
/// footprint cutoff, terminated tail) receive exactly zero.
void blend_backward(const ViewProjection& proj, const TileIndex& tiles, double u,
                    double v, const std::optional<double>& d0, double beta,
                    const Vec3& g_color, double g_depth_sum, double g_weight,
                    std::vector<ScreenGrad>& buf);

/// Backward of render_full. g_r/g_g/g_b are partials with respect to the
/// output color planes. g_depth (optional) is the partial with respect to
/// the normalized depth map; it is honored only at valid pixels, where it
/// splits over the depth quotient. Accumulates into `out`.
void render_backward(const SceneGraph& scene, const ViewProjection& proj,
                     const TileIndex& tiles, const RenderResult& rendered,
                     const ArrayXX& g_r, const ArrayXX& g_g, const ArrayXX& g_b,
                     const ArrayXX* g_depth, GradientSet& out);

/// Backward of render_pseudo_gt over the warped-ray image. Gradients are
/// honored where `mask` is set (the supervision mask of the forward pass).
/// The warp map is a constant of the step; nothing flows into the depth
/// that built it.
void pseudo_backward(const SceneGraph& scene, const ViewProjection& proj,
                     const TileIndex& tiles, const WarpMap& warp, double beta,
                     const ArrayXX& g_r, const ArrayXX& g_g, const ArrayXX& g_b,
                     const MaskXX& mask, GradientSet& out);

/// Second stage of the backward pass: pulls accumulated screen-space
/// partials through the projection, the covariance chain, pose
/// interpolation, and the reparameterizations into scene-parameter space.
/// Throws naming the primitive and view if a partial comes out non-finite.
void unproject_screen_grads(const SceneGraph& scene, const ViewProjection& proj,
                            const std::vector<ScreenGrad>& grads, GradientSet& out);

} // namespace fxd
