#include "fxd/depth_bootstrap.hpp"

#include <doctest.h>

using namespace fxd;

namespace {

CameraView make_cam(int w, int h, double f) {
    CameraView cam;
    cam.name = "front";
    cam.fx = cam.fy = f;
    cam.cx = (w - 1) / 2.0;
    cam.cy = (h - 1) / 2.0;
    cam.width = w;
    cam.height = h;
    return cam;
}

// sweep with stated world->sensor pose observing the given world points
LidarFrame sweep_observing(const Mat3& rot, const Vec3& center, double time,
                           const std::vector<Vec3>& world_pts, int object_index = -1) {
    LidarFrame f;
    f.rotation = rot;
    f.translation = -rot * center;
    f.time = time;
    for (const Vec3& p : world_pts)
        f.points.push_back({rot * p + f.translation, object_index, time});
    return f;
}

DepthMap constant_depth(int w, int h, double d) {
    DepthMap m(w, h);
    m.depth.setConstant(d);
    m.valid.setConstant(true);
    return m;
}

WorldPoint in_front(const CameraView& view, double u, double v, double depth, double ts) {
    return {view.unproject(u, v, depth), ts, -1};
}

} // namespace

TEST_CASE("single-frame accumulation is the sensor pose transform") {
    SceneGraph scene;
    Vec3 p(3, 1, 0.5);
    Mat3 rot = quat_to_mat(quat_normalized(Vec4(0.9, 0.1, 0.2, -0.3)));
    scene.lidar.push_back(sweep_observing(rot, Vec3(1, 2, 0), 0.0, {p}));
    auto pts = accumulate_lidar(scene, 0, 1);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].position.isApprox(p, 1e-12));
    CHECK(pts[0].object_index == -1);
}

TEST_CASE("a static point seen from two poses lands on one world point") {
    SceneGraph scene;
    Vec3 p(4, -2, 1);
    scene.lidar.push_back(sweep_observing(Mat3::Identity(), Vec3(0, 0, 0), 0.0, {p}));
    Mat3 rot = quat_to_mat(Vec4(std::cos(0.2), 0, std::sin(0.2), 0));
    scene.lidar.push_back(sweep_observing(rot, Vec3(2, 0, 0), 1.0, {p}));
    auto pts = accumulate_lidar(scene, 0, 2);
    REQUIRE(pts.size() == 2);
    CHECK((pts[0].position - pts[1].position).norm() < 1e-6);
}

TEST_CASE("dynamic points are compensated through the object pose") {
    SceneGraph scene;
    DynamicObject car;
    car.id = "car0";
    car.dims = Vec3(4, 2, 1.5);
    // moving +1 m/s along x
    car.track.push_back({0.0, quat_identity(), Vec3(0, 0, 0)});
    car.track.push_back({2.0, quat_identity(), Vec3(2, 0, 0)});
    scene.objects.push_back(car);

    // point on the car observed at t=1 (car at x=1); its world position then
    Vec3 world_at_1(1.5, 0.3, 0.2);
    scene.lidar.push_back(sweep_observing(Mat3::Identity(), Vec3(0, 0, 0), 0.0, {}));
    scene.lidar.push_back(
        sweep_observing(Mat3::Identity(), Vec3(-5, 0, 0), 1.0, {world_at_1}, 0));

    // compensated to frame 0 (car at x=0): appears 1 m back along motion
    auto pts = accumulate_lidar(scene, 0, 2);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].position.isApprox(Vec3(0.5, 0.3, 0.2), 1e-9));
    CHECK(pts[0].object_index == 0);
}

TEST_CASE("accumulation rejects out-of-range windows") {
    SceneGraph scene;
    scene.lidar.push_back(sweep_observing(Mat3::Identity(), Vec3::Zero(), 0.0, {}));
    CHECK_THROWS_AS(accumulate_lidar(scene, 0, 2), Error);
    CHECK_THROWS_AS(accumulate_lidar(scene, -1, 1), Error);
    CHECK_THROWS_AS(accumulate_lidar(scene, 1, 1), Error);
}

TEST_CASE("rule 1 drops points deviating from the rendered depth") {
    CameraView view = make_cam(9, 9, 20);
    DepthMap rendered = constant_depth(9, 9, 10.0);
    std::vector<WorldPoint> pts = {
        in_front(view, 2, 2, 10.4, 0.0), // 4% off: kept
        in_front(view, 6, 6, 10.6, 0.0), // 6% off: dropped
    };
    SparseDepthMap sparse = select_sparse_depth(pts, view, rendered);
    REQUIRE(sparse.samples.size() == 1);
    CHECK(sparse.samples[0].x == 2);
    CHECK(sparse.samples[0].depth == doctest::Approx(10.4));
}

TEST_CASE("pixels with invalid rendered depth skip rule 1") {
    CameraView view = make_cam(9, 9, 20);
    DepthMap rendered = constant_depth(9, 9, 10.0);
    rendered.valid(3, 3) = false;
    std::vector<WorldPoint> pts = {in_front(view, 3, 3, 25.0, 0.0)};
    SparseDepthMap sparse = select_sparse_depth(pts, view, rendered);
    CHECK(sparse.samples.size() == 1);
}

TEST_CASE("timestamp rule precedes the depth rule in collisions") {
    CameraView view = make_cam(9, 9, 20);
    DepthMap rendered(9, 9); // all invalid: rule 1 inert
    std::vector<WorldPoint> pts = {
        in_front(view, 4, 4, 8.0, 0.0),
        in_front(view, 4, 4, 5.0, 1.0),
    };
    SparseDepthMap sparse = select_sparse_depth(pts, view, rendered);
    REQUIRE(sparse.samples.size() == 1);
    CHECK(sparse.samples[0].depth == doctest::Approx(8.0)); // earlier timestamp wins
    CHECK(sparse.samples[0].timestamp == 0.0);

    // equal timestamps: minimum depth breaks the tie
    pts = {in_front(view, 4, 4, 8.0, 0.5), in_front(view, 4, 4, 5.0, 0.5)};
    sparse = select_sparse_depth(pts, view, rendered);
    REQUIRE(sparse.samples.size() == 1);
    CHECK(sparse.samples[0].depth == doctest::Approx(5.0));

    // z-min mode ignores timestamps entirely
    SelectionRules zmin;
    zmin.use_deviation = false;
    zmin.prefer_timestamp = false;
    pts = {in_front(view, 4, 4, 8.0, 0.0), in_front(view, 4, 4, 5.0, 1.0)};
    sparse = select_sparse_depth(pts, view, rendered, zmin);
    REQUIRE(sparse.samples.size() == 1);
    CHECK(sparse.samples[0].depth == doctest::Approx(5.0));
}

TEST_CASE("selection is idempotent") {
    CameraView view = make_cam(17, 13, 22);
    DepthMap rendered = constant_depth(17, 13, 12.0);
    Rng rng(5);
    std::vector<WorldPoint> pts;
    for (int k = 0; k < 400; ++k) {
        double u = uniform(rng, 0, 16), v = uniform(rng, 0, 12);
        double d = uniform(rng, 10.0, 14.0);
        pts.push_back(in_front(view, u, v, d, uniform(rng, 0, 3)));
    }
    SparseDepthMap first = select_sparse_depth(pts, view, rendered);
    REQUIRE(first.samples.size() > 20);

    // feed the survivors back in as world points
    std::vector<WorldPoint> survivors;
    for (const SparseSample& s : first.samples)
        survivors.push_back({view.unproject(s.x, s.y, s.depth), s.timestamp, -1});
    SparseDepthMap second = select_sparse_depth(survivors, view, rendered);
    REQUIRE(second.samples.size() == first.samples.size());
    for (size_t i = 0; i < first.samples.size(); ++i) {
        CHECK(second.samples[i].x == first.samples[i].x);
        CHECK(second.samples[i].y == first.samples[i].y);
        CHECK(second.samples[i].depth == doctest::Approx(first.samples[i].depth));
    }
}

TEST_CASE("rectifier recovers an exact affine corruption") {
    CameraView view = make_cam(9, 9, 20);
    DepthMap rendered(9, 9);
    SparseDepthMap sparse;
    sparse.width = 9;
    sparse.height = 9;
    Rng rng(11);
    for (int k = 0; k < 27; ++k) {
        int x = k % 9, y = k / 9;
        double dr = uniform(rng, 2.0, 20.0);
        rendered.depth(y, x) = dr;
        rendered.valid(y, x) = true;
        sparse.samples.push_back({x, y, 1.25 * dr + 0.3, 0.0});
    }
    auto fit = fit_rectifier(sparse, rendered);
    REQUIRE(fit.has_value());
    CHECK(std::abs(fit->a - 1.25) < 1e-9);
    CHECK(std::abs(fit->b - 0.3) < 1e-9);
    CHECK(fit->mean_relative_residual < 1e-12);

    // identity data fits the identity
    for (auto& s : sparse.samples) s.depth = rendered.depth(s.y, s.x);
    fit = fit_rectifier(sparse, rendered);
    REQUIRE(fit.has_value());
    CHECK(fit->a == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit->b == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fitted parameters are a local optimum of the weighted objective") {
    CameraView view = make_cam(9, 9, 20);
    DepthMap rendered(9, 9);
    SparseDepthMap sparse;
    sparse.width = sparse.height = 9;
    Rng rng(13);
    for (int k = 0; k < 40; ++k) {
        int x = k % 9, y = (k / 5) % 9;
        double dr = uniform(rng, 2.0, 25.0);
        rendered.depth(y, x) = dr;
        rendered.valid(y, x) = true;
        sparse.samples.push_back({x, y, 1.1 * dr + 0.2 + gaussian(rng, 0, 0.3), 0.0});
    }
    auto fit = fit_rectifier(sparse, rendered);
    REQUIRE(fit.has_value());

    auto objective = [&](double a, double b) {
        double total = 0;
        for (const auto& s : sparse.samples) {
            double dr = rendered.depth(s.y, s.x);
            double r = (a * dr + b - s.depth) / s.depth;
            total += r * r;
        }
        return total;
    };
    double at_fit = objective(fit->a, fit->b);
    for (double da : {-1e-3, 0.0, 1e-3})
        for (double db : {-1e-3, 0.0, 1e-3})
            CHECK(objective(fit->a + da, fit->b + db) >= at_fit - 1e-12);
}

TEST_CASE("degenerate fits are rejected") {
    DepthMap rendered(4, 4);
    SparseDepthMap sparse;
    sparse.width = sparse.height = 4;
    // single sample
    rendered.depth(0, 0) = 5;
    rendered.valid(0, 0) = true;
    sparse.samples.push_back({0, 0, 5.0, 0.0});
    CHECK_FALSE(fit_rectifier(sparse, rendered).has_value());

    // all samples at one rendered depth
    rendered.depth(1, 1) = 5;
    rendered.valid(1, 1) = true;
    sparse.samples.push_back({1, 1, 7.0, 0.0});
    CHECK_FALSE(fit_rectifier(sparse, rendered).has_value());

    // negative relation -> a <= 0 rejected
    rendered.depth(2, 2) = 10;
    rendered.valid(2, 2) = true;
    sparse.samples = {{0, 0, 10.0, 0.0}, {2, 2, 2.0, 0.0}};
    CHECK_FALSE(fit_rectifier(sparse, rendered).has_value());
}

TEST_CASE("rectify applies the affine map and invalidates non-positive depth") {
    DepthMap d(3, 1);
    d.depth << 3.0, 6.0, 0.5;
    d.valid.setConstant(true);
    LinearRectifier r{2.0, 0.5, 0, 0.0};
    DepthMap out = rectify(d, r);
    CHECK(out.depth(0, 0) == doctest::Approx(6.5));
    CHECK(out.depth(0, 1) == doctest::Approx(12.5));
    CHECK(out.valid(0, 2));

    LinearRectifier shrink{0.5, -2.0, 0, 0.0};
    out = rectify(d, shrink);
    CHECK_FALSE(out.valid(0, 0)); // 0.5*3 - 2 = -0.5
    CHECK(out.valid(0, 1));       // 0.5*6 - 2 = 1
    CHECK(out.depth(0, 1) == doctest::Approx(1.0));
    CHECK_FALSE(out.valid(0, 2));
}

TEST_CASE("identity rectifier keeps the map unchanged") {
    DepthMap d(5, 4);
    d.depth.setRandom();
    d.depth = d.depth.abs() + 1.0;
    d.valid.setConstant(true);
    DepthMap out = rectify(d, LinearRectifier{});
    CHECK((out.depth - d.depth).abs().maxCoeff() == 0.0);
    CHECK(out.valid.count() == d.valid.count());
}
