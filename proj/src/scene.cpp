#include "fxd/scene.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <map>

namespace fxd {

using nlohmann::json;

Vec3 color_at_time(const GaussianPrimitive& prim, double t, double t0) {
    Vec3 c = prim.color0;
    double dt = t - t0;
    double pow_term = 1.0;
    double factorial = 1.0;
    for (size_t k = 0; k < prim.color_taylor.size(); ++k) {
        pow_term *= dt;
        factorial *= static_cast<double>(k + 1);
        c += prim.color_taylor[k] * (pow_term / factorial);
    }
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

namespace {

json vec_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from_json(const json& arr, const std::string& what) {
    if (!arr.is_array() || arr.size() != N)
        throw Error(what + ": expected array of " + std::to_string(N));
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = arr[i].get<double>();
    return v;
}

json mat3_to_json(const Mat3& m) {
    json arr = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) arr.push_back(m(r, c));
    return arr;
}

Mat3 mat3_from_json(const json& arr, const std::string& what) {
    if (!arr.is_array() || arr.size() != 9)
        throw Error(what + ": expected array of 9");
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = arr[3 * r + c].get<double>();
    return m;
}

void check_orthonormal(const Mat3& R, const std::string& what) {
    if ((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw Error(what + ": rotation is not orthonormal");
}

constexpr char kBlobMagic[4] = {'F', 'X', 'S', 'P'};

} // namespace

void SceneGraph::validate() const {
    if (taylor_order < 0) throw Error("taylor_order must be >= 0");
    for (size_t i = 0; i < objects.size(); ++i) {
        const DynamicObject& obj = objects[i];
        if ((obj.dims.array() <= 0).any())
            throw Error("object '" + obj.id + "': box dims must be positive");
        if (obj.track.empty())
            throw Error("object '" + obj.id + "': empty pose track");
        for (size_t k = 1; k < obj.track.size(); ++k)
            if (obj.track[k].time <= obj.track[k - 1].time)
                throw Error("object '" + obj.id + "': pose track timestamps not strictly increasing");
    }
    for (size_t i = 0; i < primitives.size(); ++i) {
        const GaussianPrimitive& p = primitives[i];
        if (p.object_index >= static_cast<int>(objects.size()) || p.object_index < -1)
            throw Error("primitive " + std::to_string(i) + " references object index " +
                        std::to_string(p.object_index) + " of " +
                        std::to_string(objects.size()) + " objects");
        if (std::abs(p.rotation.norm() - 1.0) > 1e-9)
            throw Error("primitive " + std::to_string(i) + ": quaternion not normalized");
        if (static_cast<int>(p.color_taylor.size()) != taylor_order)
            throw Error("primitive " + std::to_string(i) + ": color_taylor order mismatch");
    }
    for (const CameraView& cam : cameras) {
        if (cam.fx <= 0 || cam.fy <= 0)
            throw Error("camera '" + cam.name + "': focal lengths must be positive");
        if (!(cam.cx > 0 && cam.cx < cam.width && cam.cy > 0 && cam.cy < cam.height))
            throw Error("camera '" + cam.name + "': principal point outside image");
        check_orthonormal(cam.rotation, "camera '" + cam.name + "'");
    }
    // Trajectories are per camera name; a rig has several cameras per frame.
    std::map<std::string, double> last_time;
    for (const CameraView& cam : cameras) {
        auto it = last_time.find(cam.name);
        if (it != last_time.end() && cam.time <= it->second)
            throw Error("camera '" + cam.name + "': timestamps not strictly increasing");
        last_time[cam.name] = cam.time;
    }
    for (size_t i = 1; i < lidar.size(); ++i)
        if (lidar[i].time <= lidar[i - 1].time)
            throw Error("lidar frame " + std::to_string(i) + ": timestamps not strictly increasing");
    for (size_t i = 0; i < lidar.size(); ++i) {
        check_orthonormal(lidar[i].rotation, "lidar frame " + std::to_string(i));
        for (const LidarFrame::Point& pt : lidar[i].points) {
            if (pt.position.norm() > lidar_max_range * (1.0 + 1e-9))
                throw Error("lidar frame " + std::to_string(i) + ": point beyond max range");
            if (pt.object_index >= static_cast<int>(objects.size()) || pt.object_index < -1)
                throw Error("lidar frame " + std::to_string(i) + ": point references object index " +
                            std::to_string(pt.object_index));
        }
    }
}

namespace {

void save_blob(const SceneGraph& scene, const std::filesystem::path& path) {
    const int K = scene.taylor_order;
    const uint32_t fpp = 14 + 3 * static_cast<uint32_t>(K);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out.write(kBlobMagic, 4);
    uint32_t count = static_cast<uint32_t>(scene.primitives.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(&fpp), 4);
    std::vector<float> rec(fpp);
    for (const GaussianPrimitive& p : scene.primitives) {
        int j = 0;
        for (int k = 0; k < 3; ++k) rec[j++] = static_cast<float>(p.position[k]);
        for (int k = 0; k < 4; ++k) rec[j++] = static_cast<float>(p.rotation[k]);
        for (int k = 0; k < 3; ++k) rec[j++] = static_cast<float>(p.log_scale[k]);
        rec[j++] = static_cast<float>(p.opacity_param);
        for (int k = 0; k < 3; ++k) rec[j++] = static_cast<float>(p.color0[k]);
        for (int t = 0; t < K; ++t)
            for (int k = 0; k < 3; ++k) rec[j++] = static_cast<float>(p.color_taylor[t][k]);
        out.write(reinterpret_cast<const char*>(rec.data()), rec.size() * 4);
    }
    if (!out) throw Error("write failed: " + path.string());
}

void load_blob(SceneGraph& scene, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kBlobMagic, 4) != 0)
        throw Error("bad FXSP magic in " + path.string());
    uint32_t count = 0, fpp = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    in.read(reinterpret_cast<char*>(&fpp), 4);
    const int K = scene.taylor_order;
    if (fpp != 14 + 3 * static_cast<uint32_t>(K))
        throw Error(path.string() + ": floats-per-primitive " + std::to_string(fpp) +
                    " does not match taylor_order " + std::to_string(K));
    scene.primitives.resize(count);
    std::vector<float> rec(fpp);
    for (uint32_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(rec.data()), rec.size() * 4);
        if (!in) throw Error("truncated blob: " + path.string());
        GaussianPrimitive& p = scene.primitives[i];
        int j = 0;
        for (int k = 0; k < 3; ++k) p.position[k] = rec[j++];
        for (int k = 0; k < 4; ++k) p.rotation[k] = rec[j++];
        for (int k = 0; k < 3; ++k) p.log_scale[k] = rec[j++];
        p.opacity_param = rec[j++];
        for (int k = 0; k < 3; ++k) p.color0[k] = rec[j++];
        p.color_taylor.assign(K, Vec3::Zero());
        for (int t = 0; t < K; ++t)
            for (int k = 0; k < 3; ++k) p.color_taylor[t][k] = rec[j++];
        p.rotation = quat_normalized(p.rotation);
    }
}

} // namespace

void save_scene(const SceneGraph& scene, const std::filesystem::path& json_path) {
    json doc;
    doc["format"] = "fxd-scene";
    doc["version"] = 1;
    doc["taylor_order"] = scene.taylor_order;
    doc["color_t0"] = scene.color_t0;
    doc["lidar_max_range"] = scene.lidar_max_range;

    std::filesystem::path blob_path = json_path;
    blob_path.replace_extension(".fxsp");
    doc["blob"] = blob_path.filename().string();

    json objs = json::array();
    for (const DynamicObject& obj : scene.objects) {
        json o;
        o["id"] = obj.id;
        o["dims"] = vec_to_json(obj.dims);
        o["color_t0"] = obj.color_t0;
        json track = json::array();
        for (const PoseKey& k : obj.track) {
            track.push_back({{"time", k.time},
                             {"q", vec_to_json(k.rotation)},
                             {"t", vec_to_json(k.translation)}});
        }
        o["track"] = track;
        objs.push_back(o);
    }
    doc["objects"] = objs;

    // Object membership as run-length [id-or-null, count] over blob order.
    json runs = json::array();
    size_t i = 0;
    while (i < scene.primitives.size()) {
        int oi = scene.primitives[i].object_index;
        size_t j = i;
        while (j < scene.primitives.size() && scene.primitives[j].object_index == oi) ++j;
        json run = json::array();
        if (oi < 0) {
            run.push_back(nullptr);
        } else {
            if (oi >= static_cast<int>(scene.objects.size()))
                throw Error("primitive " + std::to_string(i) + " references object index " +
                            std::to_string(oi) + " with no such object");
            run.push_back(scene.objects[oi].id);
        }
        run.push_back(j - i);
        runs.push_back(run);
        i = j;
    }
    doc["primitive_objects"] = runs;

    json cams = json::array();
    for (const CameraView& cam : scene.cameras) {
        cams.push_back({{"name", cam.name},
                        {"fx", cam.fx},
                        {"fy", cam.fy},
                        {"cx", cam.cx},
                        {"cy", cam.cy},
                        {"width", cam.width},
                        {"height", cam.height},
                        {"rotation", mat3_to_json(cam.rotation)},
                        {"t", vec_to_json(cam.translation)},
                        {"time", cam.time}});
    }
    doc["cameras"] = cams;

    json sweeps = json::array();
    for (const LidarFrame& f : scene.lidar) {
        sweeps.push_back({{"time", f.time},
                          {"rotation", mat3_to_json(f.rotation)},
                          {"t", vec_to_json(f.translation)}});
    }
    doc["lidar_poses"] = sweeps;

    std::ofstream out(json_path);
    if (!out) throw Error("cannot open for writing: " + json_path.string());
    out << doc.dump(1, '\t') << "\n";
    if (!out) throw Error("write failed: " + json_path.string());
    save_blob(scene, blob_path);
}

SceneGraph load_scene(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error("cannot open: " + json_path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(json_path.string() + ": " + e.what());
    }

    SceneGraph scene;
    try {
        if (doc.value("format", "") != "fxd-scene")
            throw Error("not an fxd-scene file");
        scene.taylor_order = doc.value("taylor_order", 2);
        scene.color_t0 = doc.value("color_t0", 0.0);
        scene.lidar_max_range = doc.value("lidar_max_range", 30.0);

        std::map<std::string, int> object_by_id;
        for (const json& o : doc.value("objects", json::array())) {
            DynamicObject obj;
            obj.id = o.at("id").get<std::string>();
            obj.dims = vec_from_json<3>(o.at("dims"), "object '" + obj.id + "' dims");
            obj.color_t0 = o.value("color_t0", 0.0);
            for (const json& k : o.at("track")) {
                PoseKey key;
                key.time = k.at("time").get<double>();
                key.rotation = quat_normalized(
                    vec_from_json<4>(k.at("q"), "object '" + obj.id + "' pose"));
                key.translation = vec_from_json<3>(k.at("t"), "object '" + obj.id + "' pose");
                obj.track.push_back(key);
            }
            if (object_by_id.count(obj.id))
                throw Error("duplicate object id '" + obj.id + "'");
            object_by_id[obj.id] = static_cast<int>(scene.objects.size());
            scene.objects.push_back(std::move(obj));
        }

        for (const json& cj : doc.value("cameras", json::array())) {
            CameraView cam;
            cam.name = cj.at("name").get<std::string>();
            cam.fx = cj.at("fx").get<double>();
            cam.fy = cj.at("fy").get<double>();
            cam.cx = cj.at("cx").get<double>();
            cam.cy = cj.at("cy").get<double>();
            cam.width = cj.at("width").get<int>();
            cam.height = cj.at("height").get<int>();
            cam.rotation = mat3_from_json(cj.at("rotation"), "camera '" + cam.name + "'");
            cam.translation = vec_from_json<3>(cj.at("t"), "camera '" + cam.name + "'");
            cam.time = cj.at("time").get<double>();
            scene.cameras.push_back(cam);
        }

        for (const json& lj : doc.value("lidar_poses", json::array())) {
            LidarFrame f;
            f.time = lj.at("time").get<double>();
            f.rotation = mat3_from_json(lj.at("rotation"), "lidar pose");
            f.translation = vec_from_json<3>(lj.at("t"), "lidar pose");
            scene.lidar.push_back(std::move(f));
        }

        std::filesystem::path blob_path =
            json_path.parent_path() / doc.at("blob").get<std::string>();
        load_blob(scene, blob_path);

        // Resolve object membership runs against the object table.
        size_t idx = 0;
        for (const json& run : doc.value("primitive_objects", json::array())) {
            int oi = -1;
            if (!run.at(0).is_null()) {
                std::string id = run.at(0).get<std::string>();
                auto it = object_by_id.find(id);
                if (it == object_by_id.end())
                    throw Error("scene references object_id '" + id + "' with no such object");
                oi = it->second;
            }
            size_t count = run.at(1).get<size_t>();
            if (idx + count > scene.primitives.size())
                throw Error("primitive_objects runs exceed primitive count");
            for (size_t k = 0; k < count; ++k) scene.primitives[idx++].object_index = oi;
        }
        if (idx != scene.primitives.size())
            throw Error("primitive_objects runs cover " + std::to_string(idx) + " of " +
                        std::to_string(scene.primitives.size()) + " primitives");
    } catch (const json::exception& e) {
        throw Error(json_path.string() + ": " + e.what());
    }

    scene.validate();
    return scene;
}

} // namespace fxd
