#include "fxd/ivw.hpp"
#include "fxd/metrics.hpp"

#include <doctest.h>

using namespace fxd;

namespace {

CameraView make_cam(int w, int h, double f, const Vec3& center = Vec3::Zero()) {
    CameraView cam;
    cam.name = "in";
    cam.fx = cam.fy = f;
    cam.cx = (w - 1) / 2.0;
    cam.cy = (h - 1) / 2.0;
    cam.width = w;
    cam.height = h;
    cam.translation = -center; // rotation = I, so t = -C
    return cam;
}

GaussianPrimitive splat_at(const Vec3& pos, double scale, double opacity, const Vec3& color) {
    GaussianPrimitive p;
    p.position = pos;
    p.log_scale = Vec3::Constant(std::log(scale));
    p.opacity_param = inverse_sigmoid(opacity);
    p.color0 = color;
    return p;
}

SceneGraph plane_scene(double z, double half_extent, const Vec3& color, double opacity,
                       Rng* palette = nullptr) {
    SceneGraph scene;
    double step = 0.14;
    for (double y = -half_extent; y <= half_extent; y += step)
        for (double x = -half_extent; x <= half_extent; x += step) {
            Vec3 c = color;
            if (palette)
                c = Vec3(uniform(*palette, 0.1, 0.9), uniform(*palette, 0.1, 0.9),
                         uniform(*palette, 0.1, 0.9));
            scene.primitives.push_back(splat_at(Vec3(x, y, z), step, opacity, c));
        }
    return scene;
}

} // namespace

TEST_CASE("identity warp reproduces the in-path render on valid pixels") {
    CameraView cam = make_cam(24, 18, 30);
    Rng palette(3);
    SceneGraph scene = plane_scene(4.0, 3.5, Vec3::Zero(), 0.95, &palette);
    RenderResult rr = render_full(scene, cam, 0.0, RenderConfig{});
    REQUIRE(rr.depth.valid_count() > 300);

    WarpMap warp = build_warp_map(cam, cam, rr.depth);
    for (double beta : {0.0, 0.95}) {
        PseudoGT pg = render_pseudo_gt(scene, warp, 0.0, beta);
        int checked = 0;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                if (!pg.mask(y, x)) continue;
                CHECK((pg.color.pixel(x, y) - rr.color.pixel(x, y)).cwiseAbs().maxCoeff() <
                      1e-9);
                ++checked;
            }
        CHECK(checked > 300);
    }
}

TEST_CASE("identity warp d0 equals the source depth") {
    CameraView cam = make_cam(16, 12, 20);
    SceneGraph scene = plane_scene(5.0, 4.0, Vec3(0.5, 0.5, 0.5), 0.95);
    DepthMap depth = render_depth(scene, cam, 0.0);
    WarpMap warp = build_warp_map(cam, cam, depth);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            if (!depth.valid(y, x)) continue;
            CHECK(warp.at(x, y).d0 == doctest::Approx(depth.depth(y, x)).epsilon(1e-12));
        }
}

TEST_CASE("lateral shift against a fronto-parallel plane keeps d0 constant") {
    CameraView v_in = make_cam(16, 12, 20);
    CameraView v_out = make_cam(16, 12, 20, Vec3(1.0, 0, 0)); // 1 m right
    v_out.name = "out";
    DepthMap depth(16, 12);
    depth.depth.setConstant(6.0);
    depth.valid.setConstant(true);

    WarpMap warp = build_warp_map(v_in, v_out, depth);
    for (const WarpMap::Entry& e : warp.entries) {
        REQUIRE(e.source_valid);
        REQUIRE(e.in_frustum);
        CHECK(e.d0 == doctest::Approx(6.0).epsilon(1e-12));
        CHECK(e.point[2] == doctest::Approx(6.0).epsilon(1e-12));
    }
    // rays are kept even when they leave the target image bounds
    WarpMap far_warp = build_warp_map(v_in, make_cam(16, 12, 20, Vec3(50.0, 0, 0)), depth);
    int outside = 0;
    for (const WarpMap::Entry& e : far_warp.entries)
        if (e.in_frustum && (e.u < -0.5 || e.u > 15.5)) ++outside;
    CHECK(outside > 0);
}

TEST_CASE("invalid source depth pixels are excluded from the mask") {
    CameraView cam = make_cam(8, 8, 12);
    DepthMap depth(8, 8);
    depth.depth.setConstant(3.0);
    depth.valid.setConstant(true);
    depth.valid(4, 2) = false;
    WarpMap warp = build_warp_map(cam, cam, depth);
    CHECK_FALSE(warp.at(2, 4).source_valid);
    SceneGraph scene = plane_scene(3.0, 2.5, Vec3(0.3, 0.3, 0.3), 0.95);
    PseudoGT pg = render_pseudo_gt(scene, warp, 0.0, 0.95);
    CHECK_FALSE(pg.mask(4, 2));
}

TEST_CASE("points behind the target camera clear in_frustum") {
    CameraView v_in = make_cam(8, 8, 12);
    CameraView v_out = make_cam(8, 8, 12, Vec3(0, 0, 10)); // ahead of the geometry
    DepthMap depth(8, 8);
    depth.depth.setConstant(3.0);
    depth.valid.setConstant(true);
    WarpMap warp = build_warp_map(v_in, v_out, depth);
    for (const WarpMap::Entry& e : warp.entries) CHECK_FALSE(e.in_frustum);
    SceneGraph empty;
    PseudoGT pg = render_pseudo_gt(empty, warp, 0.0, 0.95);
    CHECK(pg.mask.count() == 0);
}

TEST_CASE("empty scene warps to an all-miss mask") {
    CameraView cam = make_cam(8, 8, 12);
    DepthMap depth(8, 8);
    depth.depth.setConstant(3.0);
    depth.valid.setConstant(true);
    WarpMap warp = build_warp_map(cam, make_cam(8, 8, 12, Vec3(0.5, 0, 0)), depth);
    SceneGraph empty;
    PseudoGT pg = render_pseudo_gt(empty, warp, 0.0, 0.95);
    CHECK(pg.mask.count() == 0);
}

TEST_CASE("beta excludes a foreground occluder from pseudo ground truth") {
    CameraView v_in = make_cam(24, 18, 30);
    // smooth-gradient wall at z=5 so parallax does not alias the texture
    SceneGraph scene;
    double he = 4.5, step = 0.14;
    for (double y = -he; y <= he; y += step)
        for (double x = -he; x <= he; x += step)
            scene.primitives.push_back(splat_at(
                Vec3(x, y, 5.0), step, 0.95,
                Vec3(0.3 + 0.4 * (x + he) / (2 * he), 0.5, 0.3 + 0.4 * (y + he) / (2 * he))));
    // red occluder at z=1 whose whole footprint stays outside v_in's image
    // but blocks the warped rays cast from 1 m to the right
    for (double y = -0.6; y <= 0.6; y += 0.1)
        for (double x = 0.7; x <= 1.15; x += 0.05)
            scene.primitives.push_back(splat_at(Vec3(x, y, 1.0), 0.05, 0.95, Vec3(1, 0, 0)));

    // exact plane depth as the lifting map
    DepthMap depth(v_in.width, v_in.height);
    depth.depth.setConstant(5.0);
    depth.valid.setConstant(true);

    CameraView v_out = make_cam(24, 18, 30, Vec3(1.0, 0, 0));
    WarpMap warp = build_warp_map(v_in, v_out, depth);

    ImageBuffer in_path = render_color(scene, v_in, 0.0);
    PseudoGT blocked = render_pseudo_gt(scene, warp, 0.0, 0.0);
    PseudoGT occl_aware = render_pseudo_gt(scene, warp, 0.0, 0.95);

    double psnr_blocked = psnr(blocked.color, in_path, &blocked.mask);
    double psnr_aware = psnr(occl_aware.color, in_path, &occl_aware.mask);
    CHECK(psnr_aware > psnr_blocked + 3.0);
    CHECK(psnr_aware > 30.0);
}

TEST_CASE("shrinking the lateral offset never shrinks the mask") {
    CameraView v_in = make_cam(20, 16, 25);
    SceneGraph scene = plane_scene(4.0, 4.0, Vec3(0.4, 0.4, 0.4), 0.95);
    DepthMap depth = render_depth(scene, v_in, 0.0);

    MaskXX prev;
    bool first = true;
    for (double offset : {2.0, 1.0, 0.5, 0.0}) {
        WarpMap warp =
            build_warp_map(v_in, make_cam(20, 16, 25, Vec3(offset, 0, 0)), depth);
        PseudoGT pg = render_pseudo_gt(scene, warp, 0.0, 0.95);
        if (!first) {
            // every pixel valid at the larger offset stays valid
            for (int y = 0; y < v_in.height; ++y)
                for (int x = 0; x < v_in.width; ++x)
                    if (prev(y, x)) CHECK(pg.mask(y, x));
        }
        prev = pg.mask;
        first = false;
    }
}
