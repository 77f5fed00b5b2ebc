#include "fxd/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace fxd {

double psnr(const ImageBuffer& a, const ImageBuffer& b, const MaskXX* mask) {
    if (a.width != b.width || a.height != b.height)
        throw Error("psnr: image sizes differ");
    double se = 0.0;
    long n = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (mask && !(*mask)(y, x)) continue;
            se += (a.pixel(x, y) - b.pixel(x, y)).squaredNorm();
            ++n;
        }
    }
    if (n == 0) throw Error("psnr: empty mask");
    double mse = se / (3.0 * n);
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, -10.0 * std::log10(mse));
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const Eigen::Matrix<double, kWin, 1>& window() {
    static const Eigen::Matrix<double, kWin, 1> w = [] {
        Eigen::Matrix<double, kWin, 1> v;
        int half = kWin / 2;
        for (int k = 0; k < kWin; ++k)
            v[k] = std::exp(-0.5 * std::pow((k - half) / kSigma, 2));
        return Eigen::Matrix<double, kWin, 1>(v / v.sum());
    }();
    return w;
}

/// Separable zero-padded correlation with the SSIM window.
ArrayXX conv_win(const ArrayXX& img) {
    const auto& w = window();
    int half = kWin / 2;
    int H = static_cast<int>(img.rows()), W = static_cast<int>(img.cols());
    ArrayXX tmp = ArrayXX::Zero(H, W), out = ArrayXX::Zero(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0;
            for (int k = -half; k <= half; ++k) {
                int xx = x + k;
                if (xx >= 0 && xx < W) s += w[k + half] * img(y, xx);
            }
            tmp(y, x) = s;
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0;
            for (int k = -half; k <= half; ++k) {
                int yy = y + k;
                if (yy >= 0 && yy < H) s += w[k + half] * tmp(yy, x);
            }
            out(y, x) = s;
        }
    return out;
}

struct SsimMaps {
    ArrayXX s;                   // per-pixel SSIM
    ArrayXX d_mu_x, d_ex2, d_exy; // dS/d(window stat), for the backward pass
};

SsimMaps ssim_channel(const ArrayXX& x, const ArrayXX& y, const ArrayXX& z,
                      bool with_grad) {
    ArrayXX mu_x = conv_win(x) / z;
    ArrayXX mu_y = conv_win(y) / z;
    ArrayXX ex2 = conv_win(x.square()) / z;
    ArrayXX ey2 = conv_win(y.square()) / z;
    ArrayXX exy = conv_win(x * y) / z;
    ArrayXX var_x = ex2 - mu_x.square();
    ArrayXX var_y = ey2 - mu_y.square();
    ArrayXX cov = exy - mu_x * mu_y;

    ArrayXX n1 = 2.0 * mu_x * mu_y + kC1;
    ArrayXX n2 = 2.0 * cov + kC2;
    ArrayXX d1 = mu_x.square() + mu_y.square() + kC1;
    ArrayXX d2 = var_x + var_y + kC2;

    SsimMaps out;
    out.s = (n1 * n2) / (d1 * d2);
    if (with_grad) {
        // S = n1 n2 / (d1 d2); stats enter via mu_x, Ex2, Exy
        out.d_mu_x = (2.0 * mu_y * n2 - 2.0 * mu_y * n1) / (d1 * d2) -
                     out.s * (2.0 * mu_x / d1 - 2.0 * mu_x / d2);
        out.d_ex2 = -out.s / d2;
        out.d_exy = 2.0 * n1 / (d1 * d2);
    }
    return out;
}

ArrayXX masked_plane(const ArrayXX& p, const MaskXX* mask) {
    if (!mask) return p;
    return mask->select(p, ArrayXX::Zero(p.rows(), p.cols()));
}

} // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b, const MaskXX* mask) {
    if (a.width != b.width || a.height != b.height)
        throw Error("ssim: image sizes differ");
    ArrayXX z = conv_win(ArrayXX::Ones(a.height, a.width));
    double total = 0;
    long n = 0;
    const ArrayXX* pa[3] = {&a.r, &a.g, &a.b};
    const ArrayXX* pb[3] = {&b.r, &b.g, &b.b};
    for (int c = 0; c < 3; ++c) {
        ArrayXX x = masked_plane(*pa[c], mask);
        ArrayXX y = masked_plane(*pb[c], mask);
        SsimMaps m = ssim_channel(x, y, z, false);
        for (int yy = 0; yy < a.height; ++yy)
            for (int xx = 0; xx < a.width; ++xx) {
                if (mask && !(*mask)(yy, xx)) continue;
                total += m.s(yy, xx);
                ++n;
            }
    }
    if (n == 0) throw Error("ssim: empty mask");
    return total / n;
}

SsimGrad ssim_with_grad(const ImageBuffer& a, const ImageBuffer& b, const MaskXX* mask) {
    if (a.width != b.width || a.height != b.height)
        throw Error("ssim: image sizes differ");
    int H = a.height, W = a.width;
    ArrayXX z = conv_win(ArrayXX::Ones(H, W));
    long n = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (!mask || (*mask)(y, x)) ++n;
    if (n == 0) throw Error("ssim: empty mask");
    double dmean = 1.0 / (3.0 * n);

    SsimGrad out;
    const ArrayXX* pa[3] = {&a.r, &a.g, &a.b};
    const ArrayXX* pb[3] = {&b.r, &b.g, &b.b};
    ArrayXX* po[3] = {&out.dr, &out.dg, &out.db};
    double total = 0;
    for (int c = 0; c < 3; ++c) {
        ArrayXX x = masked_plane(*pa[c], mask);
        ArrayXX y = masked_plane(*pb[c], mask);
        SsimMaps m = ssim_channel(x, y, z, true);
        ArrayXX sel = ArrayXX::Zero(H, W);
        for (int yy = 0; yy < H; ++yy)
            for (int xx = 0; xx < W; ++xx) {
                if (mask && !(*mask)(yy, xx)) continue;
                total += m.s(yy, xx);
                sel(yy, xx) = dmean;
            }
        // pixel p reaches stat q through the window: fold each stat grad
        // back with the same (renormalized) window
        ArrayXX ga = conv_win(sel * m.d_mu_x / z);
        ArrayXX gb = conv_win(sel * m.d_ex2 / z);
        ArrayXX gc = conv_win(sel * m.d_exy / z);
        ArrayXX g = ga + 2.0 * x * gb + y * gc;
        if (mask) g = mask->select(g, ArrayXX::Zero(H, W));
        *po[c] = g;
    }
    out.value = total / (3.0 * n);
    return out;
}

FeatureStats compute_feature_stats(const std::vector<Eigen::VectorXd>& features) {
    if (features.empty()) throw Error("feature stats: empty feature set");
    const int d = static_cast<int>(features[0].size());
    const int n = static_cast<int>(features.size());
    FeatureStats st;
    st.mean = Eigen::VectorXd::Zero(d);
    for (const Eigen::VectorXd& f : features) {
        if (f.size() != d) throw Error("feature stats: inconsistent dimensions");
        st.mean += f;
    }
    st.mean /= n;
    st.cov = Eigen::MatrixXd::Zero(d, d);
    for (const Eigen::VectorXd& f : features) {
        Eigen::VectorXd c = f - st.mean;
        st.cov += c * c.transpose();
    }
    st.cov /= std::max(n - 1, 1);
    if (n <= d) {
        st.cov += 1e-6 * Eigen::MatrixXd::Identity(d, d);
        st.regularized = true;
    }
    return st;
}

namespace {

bool is_diagonal(const Eigen::MatrixXd& m) {
    return (m - Eigen::MatrixXd(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() <= 1e-12;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    Eigen::VectorXd ev = eig.eigenvalues();
    if (ev.minCoeff() < -1e-9)
        throw Error(std::string("fid: ") + what + " is not positive semidefinite");
    Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace

double fid(const FeatureStats& s1, const FeatureStats& s2) {
    if (s1.mean.size() != s2.mean.size())
        throw Error("fid: feature dimensions differ");
    if ((s1.cov - s1.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 ||
        (s2.cov - s2.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw Error("fid: covariance not symmetric");
    double mean_term = (s1.mean - s2.mean).squaredNorm();
    double trace_term;
    if (is_diagonal(s1.cov) && is_diagonal(s2.cov)) {
        Eigen::ArrayXd a = s1.cov.diagonal().array();
        Eigen::ArrayXd b = s2.cov.diagonal().array();
        if (a.minCoeff() < -1e-9 || b.minCoeff() < -1e-9)
            throw Error("fid: covariance is not positive semidefinite");
        trace_term = (a + b - 2.0 * (a.max(0.0) * b.max(0.0)).sqrt()).sum();
    } else {
        Eigen::MatrixXd r1 = psd_sqrt(s1.cov, "first covariance");
        Eigen::MatrixXd cross = psd_sqrt(r1 * s2.cov * r1, "cross covariance");
        trace_term = s1.cov.trace() + s2.cov.trace() - 2.0 * cross.trace();
    }
    return std::max(0.0, mean_term + trace_term);
}

Eigen::VectorXd image_features(const ImageBuffer& img, int grid) {
    if (img.width < grid || img.height < grid)
        throw Error("image too small for feature grid");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid * grid);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(grid * grid);
    for (int y = 0; y < img.height; ++y) {
        int cy = y * grid / img.height;
        for (int x = 0; x < img.width; ++x) {
            int cx = x * grid / img.width;
            double gray = (img.r(y, x) + img.g(y, x) + img.b(y, x)) / 3.0;
            out[cy * grid + cx] += gray;
            count[cy * grid + cx] += 1.0;
        }
    }
    return out.array() / count.array();
}

FidDemoReport fid_mean_shift_demo(const std::vector<Eigen::VectorXd>& gt_features,
                                  const std::vector<Eigen::VectorXd>& shifted_features) {
    if (gt_features.size() < 4 || shifted_features.empty())
        throw Error("fid demo: too few feature samples");
    std::vector<Eigen::VectorXd> split_a, split_b;
    for (size_t i = 0; i < gt_features.size(); ++i)
        (i % 2 == 0 ? split_a : split_b).push_back(gt_features[i]);

    FeatureStats sa = compute_feature_stats(split_a);
    FeatureStats sb = compute_feature_stats(split_b);
    FeatureStats ss = compute_feature_stats(shifted_features);

    FidDemoReport rep;
    rep.fid_shifted = fid(sa, ss);
    FeatureStats realigned = ss;
    realigned.mean = sa.mean; // exact mean removal; covariance is unchanged
    rep.fid_realigned = fid(sa, realigned);
    rep.fid_split = fid(sa, sb);
    rep.pass = rep.fid_realigned < rep.fid_split;
    rep.regularized = sa.regularized || sb.regularized || ss.regularized;
    return rep;
}

} // namespace fxd
