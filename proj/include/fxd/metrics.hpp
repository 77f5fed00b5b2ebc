#pragma once

#include "fxd/image.hpp"

#include <optional>
#include <vector>

namespace fxd {

/// Peak signal-to-noise ratio in dB over the mask (all pixels when mask is
/// null), averaged across channels, capped at 99 dB for identical inputs.
double psnr(const ImageBuffer& a, const ImageBuffer& b, const MaskXX* mask = nullptr);

/// Mean structural similarity, 11x11 Gaussian window (sigma 1.5),
/// C1=0.01^2, C2=0.03^2, channels averaged. Windows are renormalized at
/// the image border. With a mask, invalid pixels are zeroed in both
/// images and the mean runs over valid pixels only.
double ssim(const ImageBuffer& a, const ImageBuffer& b, const MaskXX* mask = nullptr);

/// SSIM with the gradient of (mean SSIM) with respect to the first image.
/// Gradients at masked-out pixels are zero.
struct SsimGrad {
    double value = 0.0;
    ArrayXX dr, dg, db;
};
SsimGrad ssim_with_grad(const ImageBuffer& a, const ImageBuffer& b,
                        const MaskXX* mask = nullptr);

/// Gaussian fit of a feature set.
struct FeatureStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    bool regularized = false; // true when +1e-6 I was added (n <= dim)
};

FeatureStats compute_feature_stats(const std::vector<Eigen::VectorXd>& features);

/// Frechet distance between two Gaussian fits: squared mean distance plus
/// Tr(c1 + c2 - 2 sqrt(c1^1/2 c2 c1^1/2)). Uses an elementwise square
/// root when both covariances are diagonal, the symmetric eigendecomposition
/// route otherwise. Eigenvalues below -1e-9 are rejected; small negative
/// noise is clipped to zero.
double fid(const FeatureStats& s1, const FeatureStats& s2);

/// Flattened grid x grid area-downsampled grayscale image, the desk-scale
/// stand-in for learned features.
Eigen::VectorXd image_features(const ImageBuffer& img, int grid = 8);

/// The mean-shift critique: gt features are split into interleaved halves
/// A and B; reports fid(A, shifted), fid(A, shifted realigned to mean(A)),
/// and the same-distribution baseline fid(A, B). The demo "passes" when
/// realignment alone pushes the shifted set below the baseline, showing
/// the metric can be gamed by a mean offset.
struct FidDemoReport {
    double fid_shifted = 0.0;
    double fid_realigned = 0.0;
    double fid_split = 0.0;
    bool pass = false;
    bool regularized = false;
};

FidDemoReport fid_mean_shift_demo(const std::vector<Eigen::VectorXd>& gt_features,
                                  const std::vector<Eigen::VectorXd>& shifted_features);

} // namespace fxd
