#include "fxd/dataset.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>

namespace fxd {

using nlohmann::json;

namespace {

constexpr std::uint32_t kStaticId = 0xffffffffu;
constexpr size_t kPointBytes = 5 * 4; // f32 x,y,z + u32 id + f32 time

float le_f32(const unsigned char* p) {
    std::uint32_t u = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                      std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

std::uint32_t le_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

void put_u32(std::string& out, std::uint32_t u) {
    out.push_back(char(u & 0xff));
    out.push_back(char((u >> 8) & 0xff));
    out.push_back(char((u >> 16) & 0xff));
    out.push_back(char((u >> 24) & 0xff));
}

void put_f32(std::string& out, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(out, u);
}

Mat3 rotation_from_json(const json& arr, const std::string& what) {
    if (!arr.is_array() || arr.size() != 9)
        throw Error(what + ": expected 9-element rotation");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = arr[3 * r + c].get<double>();
    return m;
}

Vec3 vec3_from_json(const json& arr, const std::string& what) {
    if (!arr.is_array() || arr.size() != 3) throw Error(what + ": expected 3 numbers");
    return Vec3(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
}

} // namespace

std::string frame_name(int frame) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", frame);
    return buf;
}

void save_lidar_points(const std::filesystem::path& path,
                       const std::vector<LidarFrame::Point>& points) {
    std::string bytes;
    bytes.reserve(points.size() * kPointBytes);
    for (const LidarFrame::Point& pt : points) {
        put_f32(bytes, float(pt.position[0]));
        put_f32(bytes, float(pt.position[1]));
        put_f32(bytes, float(pt.position[2]));
        put_u32(bytes, pt.object_index < 0 ? kStaticId : std::uint32_t(pt.object_index));
        put_f32(bytes, float(pt.time));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

std::vector<LidarFrame::Point> load_lidar_points(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % kPointBytes != 0)
        throw Error(path.string() + ": truncated point record");
    std::vector<LidarFrame::Point> points(bytes.size() / kPointBytes);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (LidarFrame::Point& pt : points) {
        pt.position = Vec3(le_f32(p), le_f32(p + 4), le_f32(p + 8));
        std::uint32_t id = le_u32(p + 12);
        pt.object_index = id == kStaticId ? -1 : int(id);
        pt.time = le_f32(p + 16);
        p += kPointBytes;
    }
    return points;
}

const DatasetCamera& Dataset::camera(const std::string& name) const {
    for (const DatasetCamera& cam : cameras)
        if (cam.name == name) return cam;
    throw Error("no camera named '" + name + "' in dataset");
}

const DatasetCamera& Dataset::train_camera(const std::string& name) const {
    const DatasetCamera& cam = camera(name);
    if (cam.role != "train")
        throw Error("camera '" + name + "' has role '" + cam.role +
                    "' and cannot be read for training");
    return cam;
}

std::vector<std::string> Dataset::camera_names(const std::string& role) const {
    std::vector<std::string> names;
    for (const DatasetCamera& cam : cameras)
        if (cam.role == role) names.push_back(cam.name);
    return names;
}

std::filesystem::path Dataset::image_path(const std::string& cam, int frame) const {
    return root / "images" / cam / (frame_name(frame) + ".ppm");
}

std::filesystem::path Dataset::depth_path(const std::string& cam, int frame) const {
    return root / "depth" / cam / (frame_name(frame) + ".fxdm");
}

ImageBuffer Dataset::image(const std::string& cam, int frame) const {
    return load_ppm(image_path(cam, frame));
}

DepthMap Dataset::depth(const std::string& cam, int frame) const {
    return load_fxdm(depth_path(cam, frame));
}

Dataset load_dataset(const std::filesystem::path& root) {
    std::ifstream in(root / "manifest.json");
    if (!in) throw Error("dataset manifest not found: " + (root / "manifest.json").string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("manifest.json: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "fxd-dataset")
        throw Error("manifest.json: not an fxd-dataset manifest");

    Dataset ds;
    ds.root = root;
    ds.width = manifest.at("width").get<int>();
    ds.height = manifest.at("height").get<int>();
    ds.frame_count = manifest.at("frames").get<int>();
    ds.frame_dt = manifest.at("frame_dt").get<double>();
    ds.lidar_max_range = manifest.value("lidar_max_range", 30.0);
    ds.background = vec3_from_json(manifest.at("background"), "background");
    for (const json& t : manifest.at("times")) ds.times.push_back(t.get<double>());
    if (int(ds.times.size()) != ds.frame_count)
        throw Error("manifest.json: times length does not match frame count");

    for (const json& cam : manifest.at("cameras")) {
        DatasetCamera out;
        out.name = cam.at("name").get<std::string>();
        if (!cam.contains("role"))
            throw Error("manifest.json: camera '" + out.name + "' is missing its role");
        out.role = cam.at("role").get<std::string>();
        if (out.role != "train" && out.role != "eval")
            throw Error("manifest.json: camera '" + out.name + "' has unknown role '" +
                        out.role + "'");
        const json& poses = cam.at("poses");
        if (int(poses.size()) != ds.frame_count)
            throw Error("manifest.json: camera '" + out.name + "' pose count mismatch");
        for (const json& pose : poses) {
            CameraView view;
            view.name = out.name;
            view.fx = cam.at("fx").get<double>();
            view.fy = cam.at("fy").get<double>();
            view.cx = cam.at("cx").get<double>();
            view.cy = cam.at("cy").get<double>();
            view.width = cam.at("width").get<int>();
            view.height = cam.at("height").get<int>();
            view.rotation = rotation_from_json(pose.at("rotation"), "camera " + out.name);
            view.translation = vec3_from_json(pose.at("translation"), "camera " + out.name);
            view.time = pose.at("time").get<double>();
            out.frames.push_back(view);
        }
        ds.cameras.push_back(out);
    }

    int sweep_index = 0;
    for (const json& sweep : manifest.at("lidar")) {
        LidarFrame frame;
        std::string what = "lidar sweep " + std::to_string(sweep_index++);
        frame.rotation = rotation_from_json(sweep.at("rotation"), what);
        frame.translation = vec3_from_json(sweep.at("translation"), what);
        frame.time = sweep.at("time").get<double>();
        frame.points = load_lidar_points(root / sweep.at("points").get<std::string>());
        ds.lidar.push_back(frame);
    }

    for (const json& o : manifest.value("objects", json::array())) {
        DynamicObject obj;
        obj.id = o.at("id").get<std::string>();
        obj.dims = vec3_from_json(o.at("dims"), "object " + obj.id);
        obj.color_t0 = o.value("color_t0", 0.0);
        for (const json& k : o.at("track")) {
            PoseKey key;
            key.time = k.at("time").get<double>();
            const json& q = k.at("rotation");
            if (!q.is_array() || q.size() != 4)
                throw Error("object " + obj.id + ": expected quaternion");
            key.rotation = Vec4(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                q[3].get<double>());
            key.translation = vec3_from_json(k.at("translation"), "object " + obj.id);
            obj.track.push_back(key);
        }
        ds.objects.push_back(obj);
    }
    return ds;
}

} // namespace fxd
