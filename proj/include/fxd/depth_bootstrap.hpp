#pragma once

#include "fxd/rasterizer.hpp"

#include <optional>
#include <vector>

namespace fxd {

/// One LiDAR return in the world frame, motion-compensated to a reference
/// time when it hit a dynamic object.
struct WorldPoint {
    Vec3 position;
    double timestamp = 0.0;
    int object_index = -1;
};

/// Accumulates sweeps [first_frame, first_frame + n_frames) into the world
/// frame. Static points go through the sensor pose. Points on a dynamic
/// object are carried into the object's box at their observation time and
/// replayed at the pose of scene.lidar[first_frame].time, so the stack is
/// crisp even for moving geometry.
std::vector<WorldPoint> accumulate_lidar(const SceneGraph& scene, int first_frame,
                                         int n_frames);

struct SparseSample {
    int x = 0, y = 0;
    double depth = 0.0;
    double timestamp = 0.0;
};

/// At most one depth sample per pixel of the source view.
struct SparseDepthMap {
    std::string view_name;
    int width = 0, height = 0;
    std::vector<SparseSample> samples; // row-major pixel order
};

struct SelectionRules {
    double dev_threshold = 0.05; // rule 1, relative to rendered depth
    bool use_deviation = true;   // rule 1 on/off
    bool prefer_timestamp = true; // rule 2 before rule 3; off: plain z-min
    double d_max = std::numeric_limits<double>::infinity();
};

/// Projects accumulated points into a view and resolves pixel collisions:
/// rule 1 drops points deviating from the rendered depth by more than
/// dev_threshold (skipped where the rendered depth is invalid), rule 2
/// keeps the earliest timestamp in a pixel, rule 3 breaks remaining ties
/// by minimum depth.
SparseDepthMap select_sparse_depth(const std::vector<WorldPoint>& points,
                                   const CameraView& view, const DepthMap& rendered,
                                   const SelectionRules& rules = {});

/// Global affine map from rendered depth to LiDAR depth.
struct LinearRectifier {
    double a = 1.0; // dimensionless scale, > 0
    double b = 0.0; // meters
    int sample_count = 0;
    double mean_relative_residual = 0.0;

    double apply(double d) const { return a * d + b; }
};

/// Weighted least squares of sparse depth D_s against rendered depth D_r
/// with weights 1/D_s^2 (each sample's residual counted relative to its
/// own range). Returns nullopt when fewer than two usable samples exist,
/// the rendered depths have no spread, or the fitted scale is not
/// positive; the caller keeps its previous rectifier in that case.
std::optional<LinearRectifier> fit_rectifier(const SparseDepthMap& sparse,
                                             const DepthMap& rendered);

/// Elementwise affine map on valid pixels; results that are not strictly
/// positive are invalidated.
DepthMap rectify(const DepthMap& rendered, const LinearRectifier& r);

/// Sparse samples as a depth raster (valid only at sample pixels).
DepthMap sparse_to_depth_map(const SparseDepthMap& sparse);

struct BootstrapConfig {
    int n_frames = 30;
    SelectionRules rules;
    RenderConfig render;
    bool rectification = true; // off: supervision uses raw sparse samples
};

/// One bootstrap pass for one view: accumulate around the view's frame,
/// select against the current rendered depth, fit, rectify. `previous`
/// carries the last good rectifier; on a degenerate fit it is reused and
/// `degenerate` is set.
struct BootstrapView {
    SparseDepthMap sparse;
    std::optional<LinearRectifier> fit; // fresh fit, nullopt when degenerate
    LinearRectifier used;               // fit or the carried-over previous
    DepthMap supervision;               // rectified dense map, or sparse raster
    bool degenerate = false;
};

BootstrapView bootstrap_view(const SceneGraph& scene, const CameraView& view,
                             const DepthMap& rendered, const BootstrapConfig& cfg,
                             const LinearRectifier& previous);

/// Bootstrap across a set of camera indices, rendering each view's depth
/// from the current field. rectifiers is the per-entry cache, resized on
/// first use.
std::vector<BootstrapView> bootstrap_step(const SceneGraph& scene,
                                          const std::vector<int>& camera_indices,
                                          const BootstrapConfig& cfg,
                                          std::vector<LinearRectifier>& rectifiers);

} // namespace fxd
