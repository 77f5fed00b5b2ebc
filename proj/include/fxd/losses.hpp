#pragma once

#include "fxd/image.hpp"
#include "fxd/metrics.hpp"

#include <vector>

namespace fxd {

struct LossWeights {
    double lambda_rgb = 1.0;
    double lambda_near = 0.1;
    double lambda_far = 0.05;
    double alpha_ssim = 0.2;
    double eps = 1e-3;    // meters, near-loss stabilizer
    double margin = 1e-4; // meters, ranking hinge
    double d_max = 30.0;  // meters, near/far split
    int n_pairs = 1024;
};

/// Mean absolute error over (masked) pixels, channels averaged, with the
/// gradient with respect to the first image.
struct L1Grad {
    double value = 0.0;
    ArrayXX dr, dg, db;
};
L1Grad l1_with_grad(const ImageBuffer& a, const ImageBuffer& b,
                    const MaskXX* mask = nullptr);
double l1_masked(const ImageBuffer& a, const ImageBuffer& b, const MaskXX* mask = nullptr);

/// L_RGB = L1_in + L1_out + alpha (L_SSIM_in + L_SSIM_out) with
/// L_SSIM = 1 - SSIM. The out-of-path pair is optional; an empty mask
/// contributes zero.
double rgb_loss(const ImageBuffer& render_in, const ImageBuffer& gt_in,
                const ImageBuffer* pseudo_render_out, const ImageBuffer* pseudo_gt_out,
                const MaskXX* out_mask, double alpha_ssim);

/// Mean relative depth error |d - d_hat| / (d_hat + eps) over pixels valid
/// in both maps with rendered depth below d_max. Empty region -> 0.
double depth_near_loss(const DepthMap& d, const DepthMap& d_hat, double eps,
                       double d_max);

/// Near-loss gradient with respect to the rendered depth map.
struct DepthLossGrad {
    double value = 0.0;
    ArrayXX d_depth; // zero at pixels outside the evaluated region
};
DepthLossGrad depth_near_loss_grad(const DepthMap& d, const DepthMap& d_hat, double eps,
                                   double d_max);

/// Pixel pairs for the far-region ranking loss, presampled so repeated
/// evaluations (and finite-difference probes) see the same pairs. Each
/// pair is (i, j) linear pixel indices with target depth strictly
/// increasing from i to j.
struct FarPairs {
    std::vector<std::pair<int, int>> pairs;
};
FarPairs sample_far_pairs(const DepthMap& d_hat, double d_max, int n_pairs, Rng& rng);

/// Hinge ranking loss mean(max(0, d_i - d_j + margin)) over presampled
/// ordered pairs; pairs with an invalid rendered endpoint are skipped.
double depth_far_ranking_loss(const DepthMap& d, const FarPairs& pairs, double margin);
DepthLossGrad depth_far_ranking_loss_grad(const DepthMap& d, const FarPairs& pairs,
                                          double margin);

/// Convenience form matching the loss definition: samples pairs itself.
double depth_far_ranking_loss(const DepthMap& d, const DepthMap& d_hat, double d_max,
                              double margin, int n_pairs, Rng& rng);

struct LossParts {
    double rgb = 0.0;
    double near = 0.0;
    double far = 0.0;
};

/// lambda1 rgb + lambda2 near + lambda3 far; throws naming the part if any
/// component is not finite.
double total_loss(const LossParts& parts, const LossWeights& weights);

} // namespace fxd
