#include "fxd/losses.hpp"

#include <algorithm>
#include <cmath>

namespace fxd {

L1Grad l1_with_grad(const ImageBuffer& a, const ImageBuffer& b, const MaskXX* mask) {
    if (a.width != b.width || a.height != b.height)
        throw Error("l1: image sizes differ");
    L1Grad out;
    out.dr = ArrayXX::Zero(a.height, a.width);
    out.dg = ArrayXX::Zero(a.height, a.width);
    out.db = ArrayXX::Zero(a.height, a.width);
    long n = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            if (!mask || (*mask)(y, x)) ++n;
    if (n == 0) return out;
    double dmean = 1.0 / (3.0 * n);

    const ArrayXX* pa[3] = {&a.r, &a.g, &a.b};
    const ArrayXX* pb[3] = {&b.r, &b.g, &b.b};
    ArrayXX* po[3] = {&out.dr, &out.dg, &out.db};
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < a.height; ++y) {
            for (int x = 0; x < a.width; ++x) {
                if (mask && !(*mask)(y, x)) continue;
                double diff = (*pa[c])(y, x) - (*pb[c])(y, x);
                out.value += std::abs(diff) * dmean;
                (*po[c])(y, x) = (diff > 0 ? 1.0 : diff < 0 ? -1.0 : 0.0) * dmean;
            }
        }
    }
    return out;
}

double l1_masked(const ImageBuffer& a, const ImageBuffer& b, const MaskXX* mask) {
    if (a.width != b.width || a.height != b.height)
        throw Error("l1: image sizes differ");
    double total = 0;
    long n = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (mask && !(*mask)(y, x)) continue;
            total += (a.pixel(x, y) - b.pixel(x, y)).cwiseAbs().sum();
            ++n;
        }
    }
    return n == 0 ? 0.0 : total / (3.0 * n);
}

double rgb_loss(const ImageBuffer& render_in, const ImageBuffer& gt_in,
                const ImageBuffer* pseudo_render_out, const ImageBuffer* pseudo_gt_out,
                const MaskXX* out_mask, double alpha_ssim) {
    double loss = l1_masked(render_in, gt_in);
    if (alpha_ssim > 0) loss += alpha_ssim * (1.0 - ssim(render_in, gt_in));
    if (pseudo_render_out && pseudo_gt_out) {
        bool any = !out_mask || out_mask->any();
        if (any) {
            loss += l1_masked(*pseudo_render_out, *pseudo_gt_out, out_mask);
            if (alpha_ssim > 0)
                loss += alpha_ssim * (1.0 - ssim(*pseudo_render_out, *pseudo_gt_out, out_mask));
        }
    }
    return loss;
}

DepthLossGrad depth_near_loss_grad(const DepthMap& d, const DepthMap& d_hat, double eps,
                                   double d_max) {
    if (d.width != d_hat.width || d.height != d_hat.height)
        throw Error("depth loss: map sizes differ");
    DepthLossGrad out;
    out.d_depth = ArrayXX::Zero(d.height, d.width);
    long n = 0;
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
            if (d.valid(y, x) && d_hat.valid(y, x) && d.depth(y, x) < d_max) ++n;
    if (n == 0) return out;
    for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
            if (!(d.valid(y, x) && d_hat.valid(y, x) && d.depth(y, x) < d_max)) continue;
            double denom = d_hat.depth(y, x) + eps;
            double diff = d.depth(y, x) - d_hat.depth(y, x);
            out.value += std::abs(diff) / denom / n;
            out.d_depth(y, x) = (diff > 0 ? 1.0 : diff < 0 ? -1.0 : 0.0) / denom / n;
        }
    }
    return out;
}

double depth_near_loss(const DepthMap& d, const DepthMap& d_hat, double eps,
                       double d_max) {
    return depth_near_loss_grad(d, d_hat, eps, d_max).value;
}

FarPairs sample_far_pairs(const DepthMap& d_hat, double d_max, int n_pairs, Rng& rng) {
    std::vector<int> far;
    for (int y = 0; y < d_hat.height; ++y)
        for (int x = 0; x < d_hat.width; ++x)
            if (d_hat.valid(y, x) && d_hat.depth(y, x) >= d_max)
                far.push_back(y * d_hat.width + x);
    FarPairs out;
    if (far.size() < 2) return out;
    std::uniform_int_distribution<size_t> pick(0, far.size() - 1);
    out.pairs.reserve(n_pairs);
    for (int k = 0; k < n_pairs; ++k) {
        int i = far[pick(rng)];
        int j = far[pick(rng)];
        double di = d_hat.depth(i / d_hat.width, i % d_hat.width);
        double dj = d_hat.depth(j / d_hat.width, j % d_hat.width);
        if (di == dj) continue;
        if (di > dj) std::swap(i, j);
        out.pairs.emplace_back(i, j);
    }
    return out;
}

DepthLossGrad depth_far_ranking_loss_grad(const DepthMap& d, const FarPairs& pairs,
                                          double margin) {
    DepthLossGrad out;
    out.d_depth = ArrayXX::Zero(d.height, d.width);
    if (pairs.pairs.empty()) return out;
    long n = 0;
    for (auto [i, j] : pairs.pairs) {
        if (d.valid(i / d.width, i % d.width) && d.valid(j / d.width, j % d.width)) ++n;
    }
    if (n == 0) return out;
    for (auto [i, j] : pairs.pairs) {
        int yi = i / d.width, xi = i % d.width;
        int yj = j / d.width, xj = j % d.width;
        if (!d.valid(yi, xi) || !d.valid(yj, xj)) continue;
        double h = d.depth(yi, xi) - d.depth(yj, xj) + margin;
        if (h > 0) {
            out.value += h / n;
            out.d_depth(yi, xi) += 1.0 / n;
            out.d_depth(yj, xj) -= 1.0 / n;
        }
    }
    return out;
}

double depth_far_ranking_loss(const DepthMap& d, const FarPairs& pairs, double margin) {
    return depth_far_ranking_loss_grad(d, pairs, margin).value;
}

double depth_far_ranking_loss(const DepthMap& d, const DepthMap& d_hat, double d_max,
                              double margin, int n_pairs, Rng& rng) {
    return depth_far_ranking_loss(d, sample_far_pairs(d_hat, d_max, n_pairs, rng), margin);
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
    auto check = [](double v, const char* name) {
        if (!std::isfinite(v))
            throw Error(std::string("loss part '") + name + "' is not finite");
    };
    check(parts.rgb, "rgb");
    check(parts.near, "near");
    check(parts.far, "far");
    return weights.lambda_rgb * parts.rgb + weights.lambda_near * parts.near +
           weights.lambda_far * parts.far;
}

} // namespace fxd
