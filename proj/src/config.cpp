#include "fxd/config.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace fxd {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void read_value(const json& j, bool& out) {
    if (!j.is_boolean()) throw Error("expected a boolean");
    out = j.get<bool>();
}

void read_value(const json& j, int& out) {
    if (!j.is_number_integer()) throw Error("expected an integer");
    out = j.get<int>();
}

void read_value(const json& j, std::uint64_t& out) {
    if (!j.is_number_unsigned() && !j.is_number_integer())
        throw Error("expected an integer");
    out = j.get<std::uint64_t>();
}

void read_value(const json& j, double& out) {
    // JSON has no literal for infinity; unbounded thresholds travel as a
    // string.
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf") {
            out = std::numeric_limits<double>::infinity();
            return;
        }
        if (s == "-inf") {
            out = -std::numeric_limits<double>::infinity();
            return;
        }
        throw Error("expected a number");
    }
    if (!j.is_number()) throw Error("expected a number");
    out = j.get<double>();
}

ordered_json finite_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

void read_value(const json& j, std::string& out) {
    if (!j.is_string()) throw Error("expected a string");
    out = j.get<std::string>();
}

void read_value(const json& j, Vec3& out) {
    if (!j.is_array() || j.size() != 3) throw Error("expected an array of 3 numbers");
    for (int k = 0; k < 3; ++k) {
        if (!j[k].is_number()) throw Error("expected an array of 3 numbers");
        out[k] = j[k].get<double>();
    }
}

void read_value(const json& j, std::vector<std::string>& out) {
    if (!j.is_array()) throw Error("expected an array of strings");
    out.clear();
    for (const json& e : j) {
        if (!e.is_string()) throw Error("expected an array of strings");
        out.push_back(e.get<std::string>());
    }
}

/// One config section: reads known keys, then rejects whatever is left.
class Section {
  public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object())
            throw Error("config section '" + where_ + "' must be an object");
    }

    template <typename T>
    void key(const char* name, T& out) {
        known_.insert(name);
        auto it = j_.find(name);
        if (it == j_.end()) return;
        try {
            read_value(*it, out);
        } catch (const Error& e) {
            throw Error("config key '" + where_ + "." + name + "': " + e.what());
        }
    }

    void object(const char* name, const std::function<void(const json&)>& fn) {
        known_.insert(name);
        auto it = j_.find(name);
        if (it != j_.end()) fn(*it);
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!known_.count(item.key()))
                throw Error("unknown config key '" + item.key() + "' in section '" +
                            where_ + "'");
    }

  private:
    const json& j_;
    std::string where_;
    std::set<std::string> known_;
};

void apply_rules(const json& j, SelectionRules& r) {
    Section s(j, "train.rules");
    s.key("dev_threshold", r.dev_threshold);
    s.key("use_deviation", r.use_deviation);
    s.key("prefer_timestamp", r.prefer_timestamp);
    s.key("d_max", r.d_max);
    s.finish();
}

void apply_train(const json& j, TrainConfig& t) {
    Section s(j, "train");
    s.key("stage1_iters", t.stage1_iters);
    s.key("stage2_iters", t.stage2_iters);
    s.key("stage3_iters", t.stage3_iters);
    s.key("learning_rate", t.learning_rate);
    s.key("adam_beta1", t.adam_beta1);
    s.key("adam_beta2", t.adam_beta2);
    s.key("adam_eps", t.adam_eps);
    s.key("lr_position", t.lr_position);
    s.key("lr_rotation", t.lr_rotation);
    s.key("lr_log_scale", t.lr_log_scale);
    s.key("lr_opacity", t.lr_opacity);
    s.key("lr_color", t.lr_color);
    s.key("lr_track", t.lr_track);
    s.key("train_tracks", t.train_tracks);
    s.key("use_bootstrap", t.use_bootstrap);
    s.key("bootstrap_interval_epochs", t.bootstrap_interval_epochs);
    s.key("accumulation_frames", t.accumulation_frames);
    s.object("rules", [&](const json& r) { apply_rules(r, t.rules); });
    s.key("use_ivw", t.use_ivw);
    s.key("beta_occ", t.beta_occ);
    s.key("box_lateral", t.box_lateral);
    s.key("box_vertical", t.box_vertical);
    s.key("densify_grad_threshold", t.densify_grad_threshold);
    s.key("prune_opacity", t.prune_opacity);
    s.key("densify_interval", t.densify_interval);
    s.key("max_primitives", t.max_primitives);
    s.key("init_voxel", t.init_voxel);
    s.key("init_opacity", t.init_opacity);
    s.key("taylor_order", t.taylor_order);
    s.key("cameras", t.cameras);
    s.key("seed", t.seed);
    s.key("log_interval", t.log_interval);
    s.finish();
}

void apply_losses(const json& j, LossWeights& w) {
    Section s(j, "losses");
    s.key("lambda_rgb", w.lambda_rgb);
    s.key("lambda_near", w.lambda_near);
    s.key("lambda_far", w.lambda_far);
    s.key("alpha_ssim", w.alpha_ssim);
    s.key("eps", w.eps);
    s.key("margin", w.margin);
    s.key("d_max", w.d_max);
    s.key("n_pairs", w.n_pairs);
    s.finish();
}

void apply_render(const json& j, RenderConfig& r) {
    Section s(j, "render");
    s.key("near_plane", r.near_plane);
    s.key("alpha_clip", r.alpha_clip);
    s.key("transmittance_floor", r.transmittance_floor);
    s.key("min_hit_weight", r.min_hit_weight);
    s.key("cov_floor", r.cov_floor);
    s.key("cutoff_mahalanobis2", r.cutoff_mahalanobis2);
    s.key("background", r.background);
    s.finish();
}

void apply_lidar(const json& j, LidarSpec& l) {
    Section s(j, "scene.lidar");
    s.key("channels", l.channels);
    s.key("azimuth_step_deg", l.azimuth_step_deg);
    s.key("elevation_lo_deg", l.elevation_lo_deg);
    s.key("elevation_hi_deg", l.elevation_hi_deg);
    s.key("max_range", l.max_range);
    s.key("range_noise", l.range_noise);
    s.key("pose_jitter", l.pose_jitter);
    s.key("height", l.height);
    s.finish();
}

BoxSpec parse_box(const json& j, const char* where) {
    BoxSpec b;
    Section s(j, where);
    s.key("center", b.center);
    s.key("dims", b.dims);
    s.key("yaw", b.yaw);
    s.finish();
    return b;
}

MoverSpec parse_mover(const json& j) {
    MoverSpec m;
    Section s(j, "scene.movers");
    s.key("id", m.id);
    s.key("dims", m.dims);
    s.key("start", m.start);
    s.key("speed", m.speed);
    s.key("lane_shift", m.lane_shift);
    s.key("shift_begin", m.shift_begin);
    s.key("shift_end", m.shift_end);
    s.key("color", m.color);
    s.finish();
    return m;
}

void apply_scene(const json& j, SceneSpec& sc) {
    Section s(j, "scene");
    s.key("seed", sc.seed);
    s.key("frames", sc.frames);
    s.key("frame_dt", sc.frame_dt);
    s.key("speed", sc.speed);
    s.key("arc_curvature", sc.arc_curvature);
    s.key("image_width", sc.image_width);
    s.key("image_height", sc.image_height);
    s.key("focal", sc.focal);
    s.key("cam_height", sc.cam_height);
    s.key("cam_pitch_deg", sc.cam_pitch_deg);
    s.key("side_yaw_deg", sc.side_yaw_deg);
    s.key("eval_offset", sc.eval_offset);
    s.key("ground_x0", sc.ground_x0);
    s.key("ground_x1", sc.ground_x1);
    s.key("ground_y0", sc.ground_y0);
    s.key("ground_y1", sc.ground_y1);
    s.key("splat_step", sc.splat_step);
    s.key("splat_aspect", sc.splat_aspect);
    s.key("splat_normal_frac", sc.splat_normal_frac);
    s.key("splat_opacity", sc.splat_opacity);
    s.key("background", sc.background);
    s.object("buildings", [&](const json& arr) {
        if (!arr.is_array()) throw Error("config key 'scene.buildings': expected an array");
        sc.buildings.clear();
        for (const json& e : arr) sc.buildings.push_back(parse_box(e, "scene.buildings"));
    });
    s.object("poles", [&](const json& arr) {
        if (!arr.is_array()) throw Error("config key 'scene.poles': expected an array");
        sc.poles.clear();
        for (const json& e : arr) sc.poles.push_back(parse_box(e, "scene.poles"));
    });
    s.object("movers", [&](const json& arr) {
        if (!arr.is_array()) throw Error("config key 'scene.movers': expected an array");
        sc.movers.clear();
        for (const json& e : arr) sc.movers.push_back(parse_mover(e));
    });
    s.object("lidar", [&](const json& l) { apply_lidar(l, sc.lidar); });
    s.finish();
}

void apply_paths(const json& j, RunPaths& p) {
    Section s(j, "paths");
    s.key("dataset", p.dataset);
    s.key("out", p.out);
    s.key("scene_file", p.scene_file);
    s.finish();
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v[0], v[1], v[2]}); }

ordered_json box_json(const BoxSpec& b) {
    ordered_json j;
    j["center"] = vec_json(b.center);
    j["dims"] = vec_json(b.dims);
    j["yaw"] = b.yaw;
    return j;
}

} // namespace

Config parse_config(const std::string& json_text, const Config& defaults) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("config is not valid JSON: ") + e.what());
    }
    Config cfg = defaults;
    Section top(j, "config");
    top.object("train", [&](const json& s) { apply_train(s, cfg.train); });
    top.object("losses", [&](const json& s) { apply_losses(s, cfg.train.weights); });
    top.object("render", [&](const json& s) { apply_render(s, cfg.train.render); });
    top.object("scene", [&](const json& s) { apply_scene(s, cfg.scene); });
    top.object("paths", [&](const json& s) { apply_paths(s, cfg.paths); });
    top.finish();
    return cfg;
}

Config load_config(const std::filesystem::path& path, const Config& defaults) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), defaults);
}

std::string config_json(const Config& cfg) {
    const TrainConfig& t = cfg.train;
    ordered_json j;

    ordered_json& jt = j["train"];
    jt["stage1_iters"] = t.stage1_iters;
    jt["stage2_iters"] = t.stage2_iters;
    jt["stage3_iters"] = t.stage3_iters;
    jt["learning_rate"] = t.learning_rate;
    jt["adam_beta1"] = t.adam_beta1;
    jt["adam_beta2"] = t.adam_beta2;
    jt["adam_eps"] = t.adam_eps;
    jt["lr_position"] = t.lr_position;
    jt["lr_rotation"] = t.lr_rotation;
    jt["lr_log_scale"] = t.lr_log_scale;
    jt["lr_opacity"] = t.lr_opacity;
    jt["lr_color"] = t.lr_color;
    jt["lr_track"] = t.lr_track;
    jt["train_tracks"] = t.train_tracks;
    jt["use_bootstrap"] = t.use_bootstrap;
    jt["bootstrap_interval_epochs"] = t.bootstrap_interval_epochs;
    jt["accumulation_frames"] = t.accumulation_frames;
    jt["rules"] = {{"dev_threshold", t.rules.dev_threshold},
                   {"use_deviation", t.rules.use_deviation},
                   {"prefer_timestamp", t.rules.prefer_timestamp},
                   {"d_max", finite_or_inf(t.rules.d_max)}};
    jt["use_ivw"] = t.use_ivw;
    jt["beta_occ"] = t.beta_occ;
    jt["box_lateral"] = t.box_lateral;
    jt["box_vertical"] = t.box_vertical;
    jt["densify_grad_threshold"] = t.densify_grad_threshold;
    jt["prune_opacity"] = t.prune_opacity;
    jt["densify_interval"] = t.densify_interval;
    jt["max_primitives"] = t.max_primitives;
    jt["init_voxel"] = t.init_voxel;
    jt["init_opacity"] = t.init_opacity;
    jt["taylor_order"] = t.taylor_order;
    jt["cameras"] = t.cameras;
    jt["seed"] = t.seed;
    jt["log_interval"] = t.log_interval;

    ordered_json& jw = j["losses"];
    jw["lambda_rgb"] = t.weights.lambda_rgb;
    jw["lambda_near"] = t.weights.lambda_near;
    jw["lambda_far"] = t.weights.lambda_far;
    jw["alpha_ssim"] = t.weights.alpha_ssim;
    jw["eps"] = t.weights.eps;
    jw["margin"] = t.weights.margin;
    jw["d_max"] = t.weights.d_max;
    jw["n_pairs"] = t.weights.n_pairs;

    ordered_json& jr = j["render"];
    jr["near_plane"] = t.render.near_plane;
    jr["alpha_clip"] = t.render.alpha_clip;
    jr["transmittance_floor"] = t.render.transmittance_floor;
    jr["min_hit_weight"] = t.render.min_hit_weight;
    jr["cov_floor"] = t.render.cov_floor;
    jr["cutoff_mahalanobis2"] = t.render.cutoff_mahalanobis2;
    jr["background"] = vec_json(t.render.background);

    const SceneSpec& sc = cfg.scene;
    ordered_json& js = j["scene"];
    js["seed"] = sc.seed;
    js["frames"] = sc.frames;
    js["frame_dt"] = sc.frame_dt;
    js["speed"] = sc.speed;
    js["arc_curvature"] = sc.arc_curvature;
    js["image_width"] = sc.image_width;
    js["image_height"] = sc.image_height;
    js["focal"] = sc.focal;
    js["cam_height"] = sc.cam_height;
    js["cam_pitch_deg"] = sc.cam_pitch_deg;
    js["side_yaw_deg"] = sc.side_yaw_deg;
    js["eval_offset"] = sc.eval_offset;
    js["ground_x0"] = sc.ground_x0;
    js["ground_x1"] = sc.ground_x1;
    js["ground_y0"] = sc.ground_y0;
    js["ground_y1"] = sc.ground_y1;
    js["splat_step"] = sc.splat_step;
    js["splat_aspect"] = sc.splat_aspect;
    js["splat_normal_frac"] = sc.splat_normal_frac;
    js["splat_opacity"] = sc.splat_opacity;
    js["background"] = vec_json(sc.background);
    js["buildings"] = ordered_json::array();
    for (const BoxSpec& b : sc.buildings) js["buildings"].push_back(box_json(b));
    js["poles"] = ordered_json::array();
    for (const BoxSpec& b : sc.poles) js["poles"].push_back(box_json(b));
    js["movers"] = ordered_json::array();
    for (const MoverSpec& m : sc.movers) {
        ordered_json jm;
        jm["id"] = m.id;
        jm["dims"] = vec_json(m.dims);
        jm["start"] = vec_json(m.start);
        jm["speed"] = m.speed;
        jm["lane_shift"] = m.lane_shift;
        jm["shift_begin"] = m.shift_begin;
        jm["shift_end"] = m.shift_end;
        jm["color"] = vec_json(m.color);
        js["movers"].push_back(jm);
    }
    ordered_json& jl = js["lidar"];
    jl["channels"] = sc.lidar.channels;
    jl["azimuth_step_deg"] = sc.lidar.azimuth_step_deg;
    jl["elevation_lo_deg"] = sc.lidar.elevation_lo_deg;
    jl["elevation_hi_deg"] = sc.lidar.elevation_hi_deg;
    jl["max_range"] = sc.lidar.max_range;
    jl["range_noise"] = sc.lidar.range_noise;
    jl["pose_jitter"] = sc.lidar.pose_jitter;
    jl["height"] = sc.lidar.height;

    ordered_json& jp = j["paths"];
    jp["dataset"] = cfg.paths.dataset;
    jp["out"] = cfg.paths.out;
    jp["scene_file"] = cfg.paths.scene_file;

    return j.dump(2);
}

std::string config_hash(const Config& cfg) {
    std::string text = config_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace fxd
