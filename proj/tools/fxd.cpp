// fxd: command line front end for the splat-field street reconstruction
// library. Subcommands cover the full loop: generate a synthetic dataset,
// train a field on it, render and evaluate views, and inspect the warping
// and depth supervision machinery on their own.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include "fxd/config.hpp"
#include "fxd/dataset.hpp"
#include "fxd/depth_bootstrap.hpp"
#include "fxd/ivw.hpp"
#include "fxd/metrics.hpp"
#include "fxd/parallel.hpp"
#include "fxd/rasterizer.hpp"
#include "fxd/synth.hpp"
#include "fxd/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace fxd;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOpts {
    std::string config_path;
    int threads = 0;
    bool deterministic = false;
    CLI::Option* o_threads = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config_path,
                    "JSON config file; explicit flags override file values");
    c.o_threads = sub->add_option(
        "--threads", c.threads,
        "worker threads (default: FXD_THREADS env var, else all logical cores)");
    sub->add_flag("--deterministic", c.deterministic,
                  "pin to one worker so outputs are machine independent");
}

// Precedence for the worker count: --deterministic > --threads > FXD_THREADS
// env var > hardware default.
void apply_common(const CommonOpts& c) {
    int workers = 0;
    if (c.deterministic) {
        workers = 1;
    } else if (c.o_threads != nullptr && c.o_threads->count() > 0) {
        workers = std::max(1, c.threads);
    } else if (const char* env = std::getenv("FXD_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) workers = n;
    }
    set_worker_count(workers);
}

Config base_config(const CommonOpts& c, Config defaults = {}) {
    if (!c.config_path.empty()) return load_config(c.config_path, defaults);
    return defaults;
}

// Every command that produces a directory drops the effective config plus a
// provenance record, so a run can be reproduced from its outputs alone.
void write_run_files(const fs::path& out, const std::string& command, const Config& cfg,
                     std::uint64_t seed, const CommonOpts& c) {
    fs::create_directories(out);
    ordered_json j;
    j["tool"] = "fxd";
    j["version"] = kVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config_hash"] = config_hash(cfg);
    j["deterministic"] = c.deterministic;
    j["threads"] = worker_count();
    std::ofstream(out / "provenance.json") << j.dump(2) << "\n";
    std::ofstream(out / "config.json") << config_json(cfg) << "\n";
}

const CameraView& frame_view(const DatasetCamera& cam, int frame) {
    if (frame < 0 || frame >= static_cast<int>(cam.frames.size()))
        throw Error("camera '" + cam.name + "' has " + std::to_string(cam.frames.size()) +
                    " frames; frame " + std::to_string(frame) + " is out of range");
    return cam.frames[static_cast<size_t>(frame)];
}

std::string default_train_camera(const Dataset& data) {
    std::vector<std::string> names = data.camera_names("train");
    if (names.empty()) throw Error("dataset has no cameras with role 'train'");
    return names.front();
}

// Moves a camera sideways along the local driving frame at the given frame
// index: positive shift is to the left of the travel direction.
CameraView shifted_view(const Dataset& data, const CameraView& v_in, int frame,
                        double shift) {
    SampleBox box = path_sample_box(data, frame, std::abs(shift) + 1.0, 1.0);
    CameraView v = v_in;
    v.translation = v_in.translation - v_in.rotation * (box.axes * Vec3(0.0, shift, 0.0));
    return v;
}

ImageBuffer mask_image(const MaskXX& mask) {
    ImageBuffer img(static_cast<int>(mask.cols()), static_cast<int>(mask.rows()));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (mask(y, x)) img.set_pixel(x, y, Vec3::Ones());
    return img;
}

// ---------------------------------------------------------------- generate

struct GenerateOpts {
    CommonOpts common;
    std::string out;
    std::string kind = "default";
    std::uint64_t seed = 0;
    int frames = 0;
    double lidar_noise = 0.0;
    CLI::Option *o_seed = nullptr, *o_frames = nullptr, *o_noise = nullptr;
};

void run_generate(GenerateOpts& o) {
    apply_common(o.common);
    Config defaults;
    defaults.scene = o.kind == "occlusion" ? occlusion_heavy_spec() : default_spec();
    Config cfg = base_config(o.common, defaults);
    if (o.o_seed->count()) cfg.scene.seed = o.seed;
    if (o.o_frames->count()) cfg.scene.frames = o.frames;
    if (o.o_noise->count()) cfg.scene.lidar.range_noise = o.lidar_noise;
    cfg.paths.out = o.out;

    generate_dataset(cfg.scene, o.out);
    write_run_files(o.out, "generate", cfg, cfg.scene.seed, o.common);
    std::cout << "wrote " << cfg.scene.frames << "-frame '" << o.kind << "' dataset ("
              << cfg.scene.image_width << "x" << cfg.scene.image_height << ") to " << o.out
              << "\n";
}

// ------------------------------------------------------------------- train

struct TrainOpts {
    CommonOpts common;
    std::string dataset;
    std::string out;
    std::uint64_t seed = TrainConfig{}.seed;
    std::vector<int> stages;
    double beta = TrainConfig{}.beta_occ;
    bool no_ivw = false;
    bool no_bootstrap = false;
    bool no_tracks = false;
    std::vector<std::string> cameras;
    CLI::Option *o_seed = nullptr, *o_stages = nullptr, *o_beta = nullptr,
                *o_cameras = nullptr;
};

void run_train(TrainOpts& o) {
    apply_common(o.common);
    Config cfg = base_config(o.common);
    if (o.o_seed->count()) cfg.train.seed = o.seed;
    if (o.o_stages->count()) {
        cfg.train.stage1_iters = o.stages[0];
        cfg.train.stage2_iters = o.stages[1];
        cfg.train.stage3_iters = o.stages[2];
    }
    if (o.o_beta->count()) cfg.train.beta_occ = o.beta;
    if (o.no_ivw) cfg.train.use_ivw = false;
    if (o.no_bootstrap) cfg.train.use_bootstrap = false;
    if (o.no_tracks) cfg.train.train_tracks = false;
    if (o.o_cameras->count()) cfg.train.cameras = o.cameras;
    cfg.paths.dataset = o.dataset;
    cfg.paths.out = o.out;
    cfg.paths.scene_file = (fs::path(o.out) / "scene.json").string();

    Dataset data = load_dataset(o.dataset);
    TrainResult res = train(data, cfg.train);

    fs::create_directories(o.out);
    save_scene(res.scene, fs::path(o.out) / "scene.json");
    std::ofstream(fs::path(o.out) / "metrics.jsonl") << res.log_jsonl();
    write_run_files(o.out, "train", cfg, cfg.train.seed, o.common);

    std::cout << "trained " << res.scene.primitives.size() << " primitives";
    if (!res.log.empty()) {
        const TrainRecord& last = res.log.back();
        std::cout << " over " << last.iteration << " iterations, final in-path psnr "
                  << last.psnr_in << " dB";
    }
    std::cout << "; field saved to " << (fs::path(o.out) / "scene.json").string() << "\n";
}

// ------------------------------------------------------------------ render

struct RenderOpts {
    CommonOpts common;
    std::string scene;
    std::string dataset;
    std::string camera;
    int frame = 0;
    bool all_frames = false;
    bool depth = false;
    std::string out;
};

void run_render(RenderOpts& o) {
    apply_common(o.common);
    Config cfg = base_config(o.common);
    Dataset data = load_dataset(o.dataset);
    SceneGraph scene = load_scene(o.scene);
    RenderConfig rc = cfg.train.render;
    rc.background = data.background;

    std::string cam_name = o.camera.empty() ? default_train_camera(data) : o.camera;
    const DatasetCamera& cam = data.camera(cam_name);
    std::vector<int> frames;
    if (o.all_frames)
        for (int f = 0; f < static_cast<int>(cam.frames.size()); ++f) frames.push_back(f);
    else
        frames.push_back(o.frame);

    fs::create_directories(o.out);
    for (int f : frames) {
        const CameraView& v = frame_view(cam, f);
        ImageBuffer img = render_color(scene, v, v.time, rc);
        save_ppm(img, fs::path(o.out) / (cam_name + "_" + frame_name(f) + ".ppm"));
        if (o.depth) {
            DepthMap d = render_depth(scene, v, v.time, rc);
            save_fxdm(d, fs::path(o.out) / (cam_name + "_" + frame_name(f) + ".fxdm"));
        }
    }
    write_run_files(o.out, "render", cfg, cfg.train.seed, o.common);
    std::cout << "rendered " << frames.size() << " view(s) of camera '" << cam_name
              << "' to " << o.out << "\n";
}

// -------------------------------------------------------------------- warp

struct WarpOpts {
    CommonOpts common;
    std::string dataset;
    std::string scene;
    std::string camera;
    int frame = 0;
    double shift = 1.0;
    double beta = TrainConfig{}.beta_occ;
    std::string depth_source = "dataset";
    std::string out;
};

void run_warp(WarpOpts& o) {
    apply_common(o.common);
    Config cfg = base_config(o.common);
    Dataset data = load_dataset(o.dataset);
    fs::path scene_path =
        o.scene.empty() ? fs::path(o.dataset) / "scene_gt.json" : fs::path(o.scene);
    SceneGraph scene = load_scene(scene_path);
    RenderConfig rc = cfg.train.render;
    rc.background = data.background;

    std::string cam_name = o.camera.empty() ? default_train_camera(data) : o.camera;
    const DatasetCamera& cam = data.train_camera(cam_name);
    const CameraView& v_in = frame_view(cam, o.frame);
    CameraView v_out = shifted_view(data, v_in, o.frame, o.shift);

    DepthMap depth = o.depth_source == "render"
                         ? render_depth(scene, v_in, v_in.time, rc)
                         : data.depth(cam_name, o.frame);
    WarpMap warp = build_warp_map(v_in, v_out, depth, rc.near_plane);
    PseudoGT pgt = render_pseudo_gt(scene, warp, v_in.time, o.beta, rc);
    ImageBuffer gt = data.image(cam_name, o.frame);

    int covered = static_cast<int>(pgt.mask.count());
    double coverage = static_cast<double>(covered) / gt.pixel_count();

    ordered_json rep;
    rep["camera"] = cam_name;
    rep["frame"] = o.frame;
    rep["shift"] = o.shift;
    rep["beta"] = o.beta;
    rep["depth_source"] = o.depth_source;
    rep["coverage"] = coverage;
    if (covered > 0)
        rep["masked_psnr"] = psnr(pgt.color, gt, &pgt.mask);
    else
        rep["masked_psnr"] = nullptr;

    fs::create_directories(o.out);
    save_ppm(pgt.color, fs::path(o.out) / "pseudo.ppm");
    save_ppm(mask_image(pgt.mask), fs::path(o.out) / "mask.ppm");
    save_ppm(gt, fs::path(o.out) / "gt.ppm");
    std::ofstream(fs::path(o.out) / "report.json") << rep.dump(2) << "\n";
    write_run_files(o.out, "warp", cfg, cfg.train.seed, o.common);
    std::cout << rep.dump(2) << "\n";
}

// --------------------------------------------------------------- bootstrap

struct BootstrapOpts {
    CommonOpts common;
    std::string dataset;
    std::string scene;
    std::string camera;
    int frame = 0;
    int frames = TrainConfig{}.accumulation_frames;
    bool raw = false;
    std::string out;
    CLI::Option* o_frames = nullptr;
};

void run_bootstrap(BootstrapOpts& o) {
    apply_common(o.common);
    Config cfg = base_config(o.common);
    Dataset data = load_dataset(o.dataset);
    fs::path scene_path =
        o.scene.empty() ? fs::path(o.dataset) / "scene_gt.json" : fs::path(o.scene);
    SceneGraph scene = load_scene(scene_path);
    // Scene files carry sweep poses only; the point payloads live with the
    // dataset.
    scene.lidar = data.lidar;
    scene.lidar_max_range = data.lidar_max_range;

    std::string cam_name = o.camera.empty() ? default_train_camera(data) : o.camera;
    const DatasetCamera& cam = data.train_camera(cam_name);
    const CameraView& view = frame_view(cam, o.frame);
    RenderConfig rc = cfg.train.render;
    rc.background = data.background;

    BootstrapConfig bc;
    bc.n_frames = o.o_frames->count() ? o.frames : cfg.train.accumulation_frames;
    bc.rules = cfg.train.rules;
    bc.render = rc;
    bc.rectification = !o.raw;

    DepthMap rendered = render_depth(scene, view, view.time, rc);
    BootstrapView bv = bootstrap_view(scene, view, rendered, bc, LinearRectifier{});

    fs::create_directories(o.out);
    save_fxdm(rendered, fs::path(o.out) / "rendered.fxdm");
    save_fxdm(sparse_to_depth_map(bv.sparse), fs::path(o.out) / "sparse.fxdm");
    save_fxdm(bv.supervision, fs::path(o.out) / "supervision.fxdm");

    ordered_json rep;
    rep["camera"] = cam_name;
    rep["frame"] = o.frame;
    rep["accumulation_frames"] = bc.n_frames;
    rep["samples"] = bv.sparse.samples.size();
    rep["rectified"] = bc.rectification;
    rep["degenerate"] = bv.degenerate;
    rep["rectifier"] = {{"a", bv.used.a},
                        {"b", bv.used.b},
                        {"sample_count", bv.used.sample_count},
                        {"mean_relative_residual", bv.used.mean_relative_residual}};
    std::ofstream(fs::path(o.out) / "report.json") << rep.dump(2) << "\n";
    write_run_files(o.out, "bootstrap", cfg, cfg.train.seed, o.common);
    std::cout << rep.dump(2) << "\n";
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
    CommonOpts common;
    std::string dataset;
    std::string scene;
    std::string role = "eval";
    bool save_renders = false;
    std::string out;
};

void run_eval(EvalOpts& o) {
    apply_common(o.common);
    Config cfg = base_config(o.common);
    Dataset data = load_dataset(o.dataset);
    SceneGraph scene = load_scene(o.scene);
    RenderConfig rc = cfg.train.render;
    rc.background = data.background;

    std::vector<std::string> names = data.camera_names(o.role);
    if (names.empty()) throw Error("dataset has no cameras with role '" + o.role + "'");

    ordered_json rep;
    rep["role"] = o.role;
    rep["cameras"] = ordered_json::object();
    double sum_p = 0.0, sum_s = 0.0;
    int n_views = 0;
    for (const std::string& name : names) {
        const DatasetCamera& cam = data.camera(name);
        double cam_p = 0.0, cam_s = 0.0;
        for (size_t f = 0; f < cam.frames.size(); ++f) {
            const CameraView& v = cam.frames[f];
            ImageBuffer img = render_color(scene, v, v.time, rc);
            ImageBuffer gt = data.image(name, static_cast<int>(f));
            cam_p += psnr(img, gt);
            cam_s += ssim(img, gt);
            if (o.save_renders && !o.out.empty())
                save_ppm(img, fs::path(o.out) / "renders" /
                                  (name + "_" + frame_name(static_cast<int>(f)) + ".ppm"));
        }
        int n = static_cast<int>(cam.frames.size());
        rep["cameras"][name] = {{"psnr", cam_p / n}, {"ssim", cam_s / n}, {"frames", n}};
        sum_p += cam_p;
        sum_s += cam_s;
        n_views += n;
    }
    rep["mean_psnr"] = sum_p / n_views;
    rep["mean_ssim"] = sum_s / n_views;

    if (!o.out.empty()) {
        fs::create_directories(o.out);
        if (o.save_renders) fs::create_directories(fs::path(o.out) / "renders");
        std::ofstream(fs::path(o.out) / "report.json") << rep.dump(2) << "\n";
        write_run_files(o.out, "eval", cfg, cfg.train.seed, o.common);
    }
    std::cout << rep.dump(2) << "\n";
}

// ---------------------------------------------------------------- fid-demo

struct FidOpts {
    CommonOpts common;
    std::string dataset;
    std::string scene;
    std::string camera;
    double shift = 1.0;
    std::string out;
};

void run_fid_demo(FidOpts& o) {
    apply_common(o.common);
    Config cfg = base_config(o.common);
    Dataset data = load_dataset(o.dataset);
    fs::path scene_path =
        o.scene.empty() ? fs::path(o.dataset) / "scene_gt.json" : fs::path(o.scene);
    SceneGraph scene = load_scene(scene_path);
    RenderConfig rc = cfg.train.render;
    rc.background = data.background;

    std::string cam_name = o.camera.empty() ? default_train_camera(data) : o.camera;
    const DatasetCamera& cam = data.train_camera(cam_name);

    std::vector<Eigen::VectorXd> gt_feats, shifted_feats;
    for (size_t f = 0; f < cam.frames.size(); ++f)
        gt_feats.push_back(image_features(data.image(cam_name, static_cast<int>(f))));
    for (size_t f = 0; f < cam.frames.size(); ++f) {
        for (double sign : {1.0, -1.0}) {
            CameraView v =
                shifted_view(data, cam.frames[f], static_cast<int>(f), sign * o.shift);
            shifted_feats.push_back(image_features(render_color(scene, v, v.time, rc)));
        }
    }
    FidDemoReport r = fid_mean_shift_demo(gt_feats, shifted_feats);

    ordered_json rep;
    rep["camera"] = cam_name;
    rep["shift"] = o.shift;
    rep["gt_frames"] = gt_feats.size();
    rep["shifted_renders"] = shifted_feats.size();
    rep["fid_shifted"] = r.fid_shifted;
    rep["fid_realigned"] = r.fid_realigned;
    rep["fid_split"] = r.fid_split;
    rep["realignment_beats_baseline"] = r.pass;
    rep["regularized"] = r.regularized;

    if (!o.out.empty()) {
        fs::create_directories(o.out);
        std::ofstream(fs::path(o.out) / "report.json") << rep.dump(2) << "\n";
        write_run_files(o.out, "fid-demo", cfg, cfg.train.seed, o.common);
    }
    std::cout << rep.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"splat-field street scene reconstruction toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GenerateOpts g;
    {
        SceneSpec d = default_spec();
        g.seed = d.seed;
        g.frames = d.frames;
        g.lidar_noise = d.lidar.range_noise;
        auto* sub = app.add_subcommand("generate", "write a synthetic driving dataset");
        sub->add_option("--out", g.out, "output dataset directory")->required();
        sub->add_option("--scene-kind", g.kind, "scene preset: default or occlusion")
            ->check(CLI::IsMember({"default", "occlusion"}))
            ->capture_default_str();
        g.o_seed = sub->add_option("--seed", g.seed, "generator seed")->capture_default_str();
        g.o_frames =
            sub->add_option("--frames", g.frames, "frame count")->capture_default_str();
        g.o_noise = sub->add_option("--lidar-noise", g.lidar_noise,
                                    "range noise sigma in meters")
                        ->capture_default_str();
        add_common(sub, g.common);
        sub->callback([&g] { run_generate(g); });
    }

    TrainOpts t;
    {
        auto* sub = app.add_subcommand("train", "fit a splat field to a dataset");
        sub->add_option("--dataset", t.dataset, "dataset directory")->required();
        sub->add_option("--out", t.out, "output run directory")->required();
        t.o_seed = sub->add_option("--seed", t.seed, "training seed")->capture_default_str();
        t.o_stages = sub->add_option("--stage-iters", t.stages,
                                     "iteration counts for the three stages, e.g. 500,1500,1000")
                         ->delimiter(',')
                         ->expected(3);
        t.o_beta = sub->add_option("--beta", t.beta, "occlusion indicator threshold")
                       ->check(CLI::Range(0.0, 1.0))
                       ->capture_default_str();
        sub->add_flag("--no-ivw", t.no_ivw, "disable out-of-path warp supervision");
        sub->add_flag("--no-bootstrap", t.no_bootstrap,
                      "supervise depth with raw accumulated samples only");
        sub->add_flag("--no-tracks", t.no_tracks, "freeze dynamic object tracks");
        t.o_cameras = sub->add_option("--cameras", t.cameras,
                                      "training cameras (default: every train-role camera)")
                          ->delimiter(',');
        add_common(sub, t.common);
        sub->callback([&t] { run_train(t); });
    }

    RenderOpts r;
    {
        auto* sub = app.add_subcommand("render", "render dataset views from a saved field");
        sub->add_option("--scene", r.scene, "scene json file")->required();
        sub->add_option("--dataset", r.dataset, "dataset directory (view source)")
            ->required();
        sub->add_option("--camera", r.camera, "camera name (default: first train camera)");
        sub->add_option("--frame", r.frame, "frame index")->capture_default_str();
        sub->add_flag("--all-frames", r.all_frames, "render every frame of the camera");
        sub->add_flag("--depth", r.depth, "also write rendered depth maps");
        sub->add_option("--out", r.out, "output directory")->required();
        add_common(sub, r.common);
        sub->callback([&r] { run_render(r); });
    }

    WarpOpts w;
    {
        auto* sub = app.add_subcommand(
            "warp", "build a shifted-view pseudo ground truth and score it");
        sub->add_option("--dataset", w.dataset, "dataset directory")->required();
        sub->add_option("--scene", w.scene,
                        "scene json file (default: the dataset's generating field)");
        sub->add_option("--camera", w.camera, "source camera (default: first train camera)");
        sub->add_option("--frame", w.frame, "frame index")->capture_default_str();
        sub->add_option("--shift", w.shift, "lateral shift in meters, positive = left")
            ->capture_default_str();
        sub->add_option("--beta", w.beta, "occlusion indicator threshold")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        sub->add_option("--depth-source", w.depth_source,
                        "warp depth: 'dataset' ground truth or 'render' from the field")
            ->check(CLI::IsMember({"dataset", "render"}))
            ->capture_default_str();
        sub->add_option("--out", w.out, "output directory")->required();
        add_common(sub, w.common);
        sub->callback([&w] { run_warp(w); });
    }

    BootstrapOpts b;
    {
        auto* sub = app.add_subcommand(
            "bootstrap", "accumulate, select and rectify depth supervision for one view");
        sub->add_option("--dataset", b.dataset, "dataset directory")->required();
        sub->add_option("--scene", b.scene,
                        "scene json file (default: the dataset's generating field)");
        sub->add_option("--camera", b.camera, "camera name (default: first train camera)");
        sub->add_option("--frame", b.frame, "frame index")->capture_default_str();
        b.o_frames = sub->add_option("--frames", b.frames, "accumulation window size")
                         ->capture_default_str();
        sub->add_flag("--raw", b.raw, "skip rectification; emit the sparse raster");
        sub->add_option("--out", b.out, "output directory")->required();
        add_common(sub, b.common);
        sub->callback([&b] { run_bootstrap(b); });
    }

    EvalOpts e;
    {
        auto* sub = app.add_subcommand("eval", "score a field against dataset images");
        sub->add_option("--dataset", e.dataset, "dataset directory")->required();
        sub->add_option("--scene", e.scene, "scene json file")->required();
        sub->add_option("--role", e.role, "camera role to score")->capture_default_str();
        sub->add_flag("--save-renders", e.save_renders, "write rendered views under --out");
        sub->add_option("--out", e.out, "optional output directory for the report");
        add_common(sub, e.common);
        sub->callback([&e] { run_eval(e); });
    }

    FidOpts f;
    {
        auto* sub = app.add_subcommand(
            "fid-demo", "show that a mean shift alone can game the image-set distance");
        sub->add_option("--dataset", f.dataset, "dataset directory")->required();
        sub->add_option("--scene", f.scene,
                        "scene json file (default: the dataset's generating field)");
        sub->add_option("--camera", f.camera, "camera name (default: first train camera)");
        sub->add_option("--shift", f.shift, "render offset in meters")->capture_default_str();
        sub->add_option("--out", f.out, "optional output directory for the report");
        add_common(sub, f.common);
        sub->callback([&f] { run_fid_demo(f); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
