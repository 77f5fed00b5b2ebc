#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fxd/dynamics.hpp"
#include "fxd/image.hpp"
#include "fxd/scene.hpp"
#include "fxd/types.hpp"

namespace fxd {

// On-disk dataset layout:
//   manifest.json                   rig, per-frame poses, roles, objects
//   images/<camera>/<frame>.ppm     8-bit renders
//   depth/<camera>/<frame>.fxdm     float32 depth, NaN = invalid
//   lidar/<frame>.bin               per point: f32 x,y,z (sensor frame),
//                                   u32 object id (0xffffffff = static),
//                                   f32 timestamp, little-endian
//   scene_gt.json (+ .fxsp)         the generating splat field, for tooling

struct DatasetCamera {
    std::string name;
    std::string role;  // "train" or "eval"
    std::vector<CameraView> frames;
};

struct Dataset {
    std::filesystem::path root;
    int width = 0;
    int height = 0;
    int frame_count = 0;
    double frame_dt = 0.0;
    std::vector<double> times;
    Vec3 background = Vec3::Zero();
    std::vector<DatasetCamera> cameras;
    std::vector<DynamicObject> objects;  // tracked boxes, a dataset input
    std::vector<LidarFrame> lidar;       // poses + loaded points
    double lidar_max_range = 30.0;

    const DatasetCamera& camera(const std::string& name) const;
    // Same lookup, but refuses cameras whose role is not "train"; supervision
    // code goes through this so evaluation views can never leak into training.
    const DatasetCamera& train_camera(const std::string& name) const;
    std::vector<std::string> camera_names(const std::string& role) const;

    std::filesystem::path image_path(const std::string& cam, int frame) const;
    std::filesystem::path depth_path(const std::string& cam, int frame) const;
    ImageBuffer image(const std::string& cam, int frame) const;
    DepthMap depth(const std::string& cam, int frame) const;
};

Dataset load_dataset(const std::filesystem::path& root);

void save_lidar_points(const std::filesystem::path& path,
                       const std::vector<LidarFrame::Point>& points);
std::vector<LidarFrame::Point> load_lidar_points(const std::filesystem::path& path);

std::string frame_name(int frame);  // zero-padded, e.g. "0007"

}  // namespace fxd
