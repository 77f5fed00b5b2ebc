#pragma once

#include "fxd/image.hpp"
#include "fxd/scene.hpp"

#include <optional>
#include <vector>

namespace fxd {

struct RenderConfig {
    double near_plane = 0.05;            // meters; centers at or behind are culled
    double alpha_clip = 0.99;            // per-splat alpha ceiling
    double transmittance_floor = 1e-4;   // blending terminates below this
    double min_hit_weight = 1e-4;        // pixel counts as hit above this
    double cov_floor = 0.3;              // px^2 dilation of the screen covariance
    double cutoff_mahalanobis2 = 9.0;    // 3 sigma footprint cutoff
    Vec3 background = Vec3::Zero();
};

/// Local affine (EWA) Jacobian of the perspective map. The evaluation
/// point is pulled back to ~1.3x the view cone first: beyond it the
/// linearization stops describing anything on screen and footprints
/// diverge (a splat grazing the camera plane would otherwise blanket the
/// whole image). Only the covariance uses this; the mean projects exactly.
struct EwaJacobian {
    Eigen::Matrix<double, 2, 3> J;
    double tx = 0.0, ty = 0.0; // cone-limited camera-frame x, y
    bool clamped_x = false, clamped_y = false;
};

EwaJacobian ewa_jacobian(const CameraView& view, const Vec3& pc);

/// A Gaussian after perspective projection into one view.
struct ProjectedGaussian {
    Vec2 mean2d;
    Mat2 cov2d;     // J Sigma_cam J^T + floor
    Mat2 conic;     // cov2d^{-1}
    double depth;   // camera-frame z of the 3D mean
    double opacity; // sigmoid(opacity_param)
    Vec3 color;     // time-evaluated RGB
    double radius;  // 3 sigma screen-space bound
    int prim_index;
};

/// A single ray with an optional reference depth for occlusion-aware
/// blending. Origin must coincide with the rendering camera's center.
struct RaySample {
    Vec3 origin;
    Vec3 direction; // unit
    std::optional<double> d0;
};

/// World-frame evaluation of one primitive at one time, with the pieces
/// the backward pass chains through.
struct WorldGaussian {
    Vec3 mean;
    Mat3 rot_eff;   // R_t * R_q for dynamic primitives, R_q otherwise
    Vec3 scale;
    double opacity;
    Vec3 color;           // clamped
    Vec3 color_pre_clamp; // before [0,1] clamp
    double dt;            // t - reference_time
    Mat3 rot_obj;         // box pose rotation (identity for static)
    Vec3 local;           // box-local position (dynamic only)
    int pose_lo = 0, pose_hi = 0;
    double pose_u = 0.0;
};

WorldGaussian evaluate_world(const SceneGraph& scene, const GaussianPrimitive& prim,
                             double t);

/// Perspective projection of one primitive. Returns nullopt when culled
/// (center behind the near plane, or footprint entirely off-image unless
/// keep_offscreen). Culling is a value, not an error.
std::optional<ProjectedGaussian> project_gaussian(const WorldGaussian& wg,
                                                  const CameraView& view,
                                                  const RenderConfig& cfg,
                                                  bool keep_offscreen = false);

std::optional<ProjectedGaussian> project(const SceneGraph& scene,
                                         const GaussianPrimitive& prim,
                                         const CameraView& view, double t,
                                         const RenderConfig& cfg = {});

/// Tile-binned candidate lists over a pixel-space rectangle. Bin contents
/// stay in ascending depth order.
struct TileIndex {
    double x0 = 0, y0 = 0;
    int tiles_x = 0, tiles_y = 0;
    int tile = 16;
    std::vector<std::vector<int>> bins; // indices into the sorted projection

    const std::vector<int>& bin_at(double u, double v) const;
};

/// Depth-sorted projection of the whole scene into one view at one time.
/// Pure function of its inputs; read-only during rendering, so pixels and
/// rays may be blended from it in parallel.
struct ViewProjection {
    CameraView view;
    double time = 0.0;
    RenderConfig cfg;
    std::vector<ProjectedGaussian> sorted; // ascending center depth, ties by primitive index
    std::vector<WorldGaussian> world;      // aligned with sorted

    TileIndex make_tiles(double x0, double y0, double x1, double y1) const;
    TileIndex image_tiles() const;
};

ViewProjection project_view(const SceneGraph& scene, const CameraView& view, double t,
                            const RenderConfig& cfg = {}, bool keep_offscreen = false);

/// One front-to-back alpha blend at image point (u, v). With a reference
/// depth d0, only primitives with depth > beta * d0 enter the blend; the
/// transmittance product runs over that same subset.
struct BlendResult {
    Vec3 color_sum = Vec3::Zero(); // sum alpha_i T_i c_i (no background)
    double weight = 0.0;           // sum alpha_i T_i
    double depth_sum = 0.0;        // sum alpha_i T_i d_i
    double t_residual = 1.0;       // transmittance after the last blended splat

    Vec3 composite(const Vec3& background) const {
        return color_sum + t_residual * background;
    }
};

BlendResult blend_at(const ViewProjection& proj, const TileIndex& tiles, double u,
                     double v, const std::optional<double>& d0, double beta);

/// Full-image render with the per-pixel sums the backward pass and the
/// losses need.
struct RenderResult {
    ImageBuffer color;
    DepthMap depth;
    ArrayXX weight;
    ArrayXX depth_sum;
    ArrayXX t_residual;
};

RenderResult render_full(const ViewProjection& proj);
RenderResult render_full(const SceneGraph& scene, const CameraView& view, double t,
                         const RenderConfig& cfg = {});

ImageBuffer render_color(const SceneGraph& scene, const CameraView& view, double t,
                         const RenderConfig& cfg = {});
DepthMap render_depth(const SceneGraph& scene, const CameraView& view, double t,
                      const RenderConfig& cfg = {});

/// Occlusion-aware single-ray render. The ray origin must equal the view's
/// camera center; beta in [0,1]. Returns the composited color and whether
/// the accumulated weight reached the hit threshold.
std::pair<Vec3, bool> render_ray_limited(const SceneGraph& scene, const CameraView& view,
                                         const RaySample& ray, double t, double beta,
                                         const RenderConfig& cfg = {});

} // namespace fxd
