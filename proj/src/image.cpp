#include "fxd/image.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace fxd {

namespace {

uint8_t quantize(double v) {
    double q = std::lround(std::min(std::max(v, 0.0), 1.0) * 255.0);
    return static_cast<uint8_t>(q);
}

void write_u32(std::ostream& out, uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.write(buf, 4);
}

void write_f32(std::ostream& out, float v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.write(buf, 4);
}

uint32_t read_u32(std::istream& in) {
    char buf[4];
    in.read(buf, 4);
    uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
}

} // namespace

void save_ppm(const ImageBuffer& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            row[3 * x + 0] = quantize(img.r(y, x));
            row[3 * x + 1] = quantize(img.g(y, x));
            row[3 * x + 2] = quantize(img.b(y, x));
        }
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw Error("write failed: " + path.string());
}

ImageBuffer load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw Error("not a P6 PPM: " + path.string());
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (w <= 0 || h <= 0 || maxval != 255)
        throw Error("unsupported PPM header in " + path.string());
    in.get(); // single whitespace after maxval
    ImageBuffer img(w, h);
    std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw Error("truncated PPM: " + path.string());
        for (int x = 0; x < w; ++x) {
            img.r(y, x) = row[3 * x + 0] / 255.0;
            img.g(y, x) = row[3 * x + 1] / 255.0;
            img.b(y, x) = row[3 * x + 2] / 255.0;
        }
    }
    return img;
}

void save_fxdm(const DepthMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out.write("FXDM", 4);
    write_u32(out, static_cast<uint32_t>(map.width));
    write_u32(out, static_cast<uint32_t>(map.height));
    write_f32(out, std::numeric_limits<float>::quiet_NaN());
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            write_f32(out, map.valid(y, x)
                               ? static_cast<float>(map.depth(y, x))
                               : std::numeric_limits<float>::quiet_NaN());
    if (!out) throw Error("write failed: " + path.string());
}

DepthMap load_fxdm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "FXDM", 4) != 0)
        throw Error("bad FXDM magic in " + path.string());
    uint32_t w = read_u32(in);
    uint32_t h = read_u32(in);
    read_u32(in); // sentinel slot; invalid pixels are NaN by convention
    DepthMap map(static_cast<int>(w), static_cast<int>(h));
    std::vector<float> row(w);
    for (uint32_t y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size() * 4);
        if (!in) throw Error("truncated FXDM: " + path.string());
        for (uint32_t x = 0; x < w; ++x) {
            if (std::isfinite(row[x])) {
                map.depth(y, x) = row[x];
                map.valid(y, x) = true;
            }
        }
    }
    return map;
}

} // namespace fxd
