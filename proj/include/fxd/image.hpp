#pragma once

#include "fxd/types.hpp"

#include <filesystem>

namespace fxd {

/// Dense RGB raster, channels in [0,1], stored as three H x W planes.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    ArrayXX r, g, b;

    ImageBuffer() = default;
    ImageBuffer(int w, int h, const Vec3& fill = Vec3::Zero())
        : width(w), height(h),
          r(ArrayXX::Constant(h, w, fill[0])),
          g(ArrayXX::Constant(h, w, fill[1])),
          b(ArrayXX::Constant(h, w, fill[2])) {}

    Vec3 pixel(int x, int y) const { return Vec3(r(y, x), g(y, x), b(y, x)); }
    void set_pixel(int x, int y, const Vec3& c) {
        r(y, x) = c[0];
        g(y, x) = c[1];
        b(y, x) = c[2];
    }
    int pixel_count() const { return width * height; }
};

/// Dense depth raster in meters with a per-pixel validity mask.
/// Invalid pixels are excluded from every loss and metric.
struct DepthMap {
    int width = 0;
    int height = 0;
    ArrayXX depth;
    MaskXX valid;

    DepthMap() = default;
    DepthMap(int w, int h)
        : width(w), height(h),
          depth(ArrayXX::Zero(h, w)),
          valid(MaskXX::Constant(h, w, false)) {}

    int valid_count() const { return static_cast<int>(valid.count()); }
};

// Binary PPM (P6, maxval 255, row-major top-to-bottom).
void save_ppm(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer load_ppm(const std::filesystem::path& path);

// Raw little-endian f32 raster with 16-byte header:
// magic "FXDM", u32 width, u32 height, f32 invalid sentinel (NaN).
void save_fxdm(const DepthMap& map, const std::filesystem::path& path);
DepthMap load_fxdm(const std::filesystem::path& path);

} // namespace fxd
