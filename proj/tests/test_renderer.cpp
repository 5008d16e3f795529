#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jgs/renderer.hpp"
#include "jgs/rng.hpp"

using namespace jgs;

namespace {

CameraIntrinsics test_intrinsics(int size = 33) {
    // odd size: the optical axis lands exactly on the center pixel's center
    CameraIntrinsics intr;
    intr.width = intr.height = size;
    intr.fx = intr.fy = size;
    intr.cx = intr.cy = (size / 2) + 0.5;
    return intr;
}

PosedSplats one_splat(const Eigen::Vector3d& pos, double radius, double opacity,
                      const Eigen::Vector3d& color) {
    PosedSplats s;
    s.resize(1);
    s.position[0] = pos;
    s.covariance[0] = radius * radius * Eigen::Matrix3d::Identity();
    s.opacity[0] = opacity;
    s.color[0] = color;
    return s;
}

PosedSplats random_splats(int n, Rng& rng, double depth_lo = 1.0, double depth_hi = 4.0) {
    PosedSplats s;
    s.resize(n);
    for (int i = 0; i < n; ++i) {
        s.position[i] = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                         rng.uniform(depth_lo, depth_hi)};
        const Eigen::Matrix3d r = so3_exp_matrix(rng.normal3(1.0));
        Eigen::Vector3d scale(std::exp(rng.normal(0.4)) * 0.08,
                              std::exp(rng.normal(0.4)) * 0.08,
                              std::exp(rng.normal(0.4)) * 0.08);
        const Eigen::Matrix3d rs = r * scale.asDiagonal();
        s.covariance[i] = rs * rs.transpose();
        s.opacity[i] = rng.uniform(0.2, 0.95);
        s.color[i] = {rng.uniform(), rng.uniform(), rng.uniform()};
    }
    return s;
}

}  // namespace

TEST_CASE("empty splat set renders the background") {
    PosedSplats none;
    RenderOptions opts;
    opts.background = Eigen::Vector3d::Ones();
    const ImageBuffer img =
        rasterize(none, test_intrinsics(), RigidTransform::identity(), opts);
    for (int p = 0; p < img.pixels(); ++p) {
        CHECK(img.rgb[3 * p] == 1.0);
        CHECK(img.rgb[3 * p + 1] == 1.0);
        CHECK(img.alpha[p] == 0.0);
    }
}

TEST_CASE("a saturated splat dominates the center pixel") {
    const Eigen::Vector3d color(0.3, 0.3, 0.3);
    const PosedSplats s = one_splat({0, 0, 2.0}, 50.0, 1.0 - 1e-12, color);
    RenderOptions opts;  // black background
    SplatWorkspace ws;
    const CameraIntrinsics intr = test_intrinsics();
    const ImageBuffer img = rasterize(s, intr, RigidTransform::identity(), opts, &ws);
    const int cx = intr.width / 2, cy = intr.height / 2;
    for (int c = 0; c < 3; ++c)
        CHECK(std::abs(img.px(cx, cy)[c] - color[c]) < 1.0 / 255.0);
    CHECK(img.alpha_at(cx, cy) >= kAlphaClamp - 1e-12);
}

TEST_CASE("two overlapping splats composite front to back") {
    PosedSplats s;
    s.resize(2);
    // both centered on the optical axis, radii much larger than the image
    s.position[0] = {0, 0, 1.5};
    s.position[1] = {0, 0, 3.0};
    for (int i = 0; i < 2; ++i) s.covariance[i] = 1e4 * Eigen::Matrix3d::Identity();
    s.opacity[0] = 0.6;
    s.color[0] = {1, 0, 0};
    s.opacity[1] = 1.0;
    s.color[1] = {0, 0, 1};

    const CameraIntrinsics intr = test_intrinsics();
    const ImageBuffer img = rasterize(s, intr, RigidTransform::identity(), RenderOptions{});
    const int cx = intr.width / 2, cy = intr.height / 2;
    // hand-evaluated chain: 0.6*(1,0,0) + 0.4*0.99*(0,0,1) on black
    CHECK(img.px(cx, cy)[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(img.px(cx, cy)[1] == doctest::Approx(0.0));
    CHECK(img.px(cx, cy)[2] == doctest::Approx(0.4 * 0.99).epsilon(1e-12));

    SUBCASE("swapping depths swaps the roles exactly") {
        std::swap(s.position[0], s.position[1]);
        const ImageBuffer swapped =
            rasterize(s, intr, RigidTransform::identity(), RenderOptions{});
        // now blue (opacity 1 -> clamped 0.99) is in front
        CHECK(swapped.px(cx, cy)[2] == doctest::Approx(0.99).epsilon(1e-12));
        CHECK(swapped.px(cx, cy)[0] == doctest::Approx(0.01 * 0.6).epsilon(1e-12));
    }
}

TEST_CASE("adding a splat never decreases any pixel's alpha") {
    Rng rng(71);
    const CameraIntrinsics intr = test_intrinsics();
    PosedSplats s = random_splats(50, rng);
    const ImageBuffer before = rasterize(s, intr, RigidTransform::identity(), RenderOptions{});

    PosedSplats more = s;
    more.resize(51);
    more.position[50] = {0.1, -0.2, 2.0};
    more.covariance[50] = 0.04 * Eigen::Matrix3d::Identity();
    more.opacity[50] = 0.7;
    more.color[50] = {0.5, 0.5, 0.5};
    const ImageBuffer after = rasterize(more, intr, RigidTransform::identity(), RenderOptions{});
    for (int p = 0; p < before.pixels(); ++p) CHECK(after.alpha[p] >= before.alpha[p] - 1e-15);
}

TEST_CASE("rasterization is deterministic") {
    Rng rng(72);
    const CameraIntrinsics intr = test_intrinsics();
    const PosedSplats s = random_splats(80, rng);
    const ImageBuffer a = rasterize(s, intr, RigidTransform::identity(), RenderOptions{});
    const ImageBuffer b = rasterize(s, intr, RigidTransform::identity(), RenderOptions{});
    CHECK(a.rgb == b.rgb);
    CHECK(a.alpha == b.alpha);
}

TEST_CASE("zero pixel gradients give zero parameter gradients") {
    Rng rng(73);
    const CameraIntrinsics intr = test_intrinsics();
    const PosedSplats s = random_splats(20, rng);
    SplatWorkspace ws;
    rasterize(s, intr, RigidTransform::identity(), RenderOptions{}, &ws);
    ImageGrad dpix;
    dpix.resize(intr.width * intr.height);
    const RasterGrads g = rasterize_backward(s, intr, RigidTransform::identity(), ws, dpix);
    for (int i = 0; i < 20; ++i) {
        CHECK(g.position[i].norm() == 0.0);
        CHECK(g.covariance[i].norm() == 0.0);
        CHECK(g.opacity[i] == 0.0);
        CHECK(g.color[i].norm() == 0.0);
    }
    CHECK(g.cam_rot.norm() == 0.0);
}

namespace {

// scalar probe loss: weighted sum of all output channels
double probe_loss(const PosedSplats& s, const CameraIntrinsics& intr, const RigidTransform& pose,
                  const RenderOptions& opts, const std::vector<double>& wr,
                  const std::vector<double>& wa) {
    const ImageBuffer img = rasterize(s, intr, pose, opts);
    double loss = 0.0;
    for (std::size_t i = 0; i < img.rgb.size(); ++i) loss += wr[i] * img.rgb[i];
    for (std::size_t i = 0; i < img.alpha.size(); ++i) loss += wa[i] * img.alpha[i];
    return loss;
}

}  // namespace

TEST_CASE("backward pass matches finite differences for splat attributes") {
    Rng rng(74);
    const CameraIntrinsics intr = test_intrinsics(17);
    PosedSplats s = random_splats(12, rng);
    RenderOptions opts;
    opts.background = {0.2, 0.3, 0.1};

    std::vector<double> wr(3 * intr.width * intr.height), wa(intr.width * intr.height);
    for (auto& v : wr) v = rng.normal();
    for (auto& v : wa) v = rng.normal();

    SplatWorkspace ws;
    rasterize(s, intr, RigidTransform::identity(), opts, &ws);
    ImageGrad dpix;
    dpix.resize(intr.width * intr.height);
    dpix.rgb = wr;
    dpix.alpha = wa;
    const RasterGrads g = rasterize_backward(s, intr, RigidTransform::identity(), ws, dpix);

    const double h = 1e-6;
    auto fd_check = [&](double* param, double analytic, double tol) {
        const double saved = *param;
        *param = saved + h;
        const double up = probe_loss(s, intr, RigidTransform::identity(), opts, wr, wa);
        *param = saved - h;
        const double down = probe_loss(s, intr, RigidTransform::identity(), opts, wr, wa);
        *param = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-7});
        CHECK(std::abs(fd - analytic) / denom < tol);
    };

    for (int i = 0; i < 12; ++i) {
        fd_check(&s.opacity[i], g.opacity[i], 1e-4);
        for (int a = 0; a < 3; ++a) fd_check(&s.color[i][a], g.color[i][a], 1e-4);
        for (int a = 0; a < 3; ++a) fd_check(&s.position[i][a], g.position[i][a], 1e-3);
        // symmetric covariance entries: perturb symmetrically
        for (int r = 0; r < 3; ++r)
            for (int c = r; c < 3; ++c) {
                const double saved = s.covariance[i](r, c);
                const double analytic =
                    r == c ? g.covariance[i](r, c)
                           : g.covariance[i](r, c) + g.covariance[i](c, r);
                s.covariance[i](r, c) = s.covariance[i](c, r) = saved + h;
                const double up = probe_loss(s, intr, RigidTransform::identity(), opts, wr, wa);
                s.covariance[i](r, c) = s.covariance[i](c, r) = saved - h;
                const double down = probe_loss(s, intr, RigidTransform::identity(), opts, wr, wa);
                s.covariance[i](r, c) = s.covariance[i](c, r) = saved;
                const double fd = (up - down) / (2.0 * h);
                const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-7});
                CHECK(std::abs(fd - analytic) / denom < 1e-3);
            }
    }
}

TEST_CASE("backward pass matches finite differences for the camera") {
    Rng rng(75);
    CameraIntrinsics intr = test_intrinsics(32);
    intr.cx = 16.0;
    intr.cy = 16.0;
    PosedSplats s = random_splats(50, rng);
    RenderOptions opts;
    opts.background = {0.1, 0.1, 0.1};

    RigidTransform base;
    base.rotation = so3_exp({0.05, -0.1, 0.02});
    base.translation = {0.02, -0.03, 0.05};

    std::vector<double> wr(3 * intr.width * intr.height), wa(intr.width * intr.height);
    for (auto& v : wr) v = rng.normal();
    for (auto& v : wa) v = rng.normal();

    // 6-dof correction chart around the base pose
    Eigen::Matrix<double, 6, 1> xi = Eigen::Matrix<double, 6, 1>::Zero();
    auto pose_of = [&](const Eigen::Matrix<double, 6, 1>& v) {
        RigidTransform delta;
        delta.rotation = so3_exp(v.head<3>());
        delta.translation = v.tail<3>();
        return se3_compose(delta, base);
    };

    SplatWorkspace ws;
    rasterize(s, intr, pose_of(xi), opts, &ws);
    ImageGrad dpix;
    dpix.resize(intr.width * intr.height);
    dpix.rgb = wr;
    dpix.alpha = wa;
    const RasterGrads g = rasterize_backward(s, intr, pose_of(xi), ws, dpix);

    // pull the rotation gradient back onto the 6-dof chart at xi = 0
    Eigen::Matrix<double, 6, 1> analytic;
    Eigen::Matrix3d d_delta_rot = g.cam_rot * base.rotation.matrix().transpose();
    d_delta_rot += g.cam_trans * base.translation.transpose();
    analytic.head<3>() = so3_exp_backward(Eigen::Vector3d::Zero(), d_delta_rot);
    analytic.tail<3>() = g.cam_trans;

    const double h = 1e-6;
    for (int a = 0; a < 6; ++a) {
        Eigen::Matrix<double, 6, 1> hi = xi, lo = xi;
        hi[a] += h;
        lo[a] -= h;
        const double up = probe_loss(s, intr, pose_of(hi), opts, wr, wa);
        const double down = probe_loss(s, intr, pose_of(lo), opts, wr, wa);
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic[a]), 1e-7});
        CHECK(std::abs(fd - analytic[a]) / denom < 1e-3);
    }
}

TEST_CASE("optional depth channel accumulates alpha-weighted depths") {
    const PosedSplats s = one_splat({0, 0, 2.0}, 50.0, 1.0 - 1e-12, {0.5, 0.5, 0.5});
    RenderOptions opts;
    opts.with_depth = true;
    const CameraIntrinsics intr = test_intrinsics();
    const ImageBuffer img = rasterize(s, intr, RigidTransform::identity(), opts);
    REQUIRE_FALSE(img.depth.empty());
    const int c = intr.width / 2;
    CHECK(img.depth[c * intr.width + c] == doctest::Approx(0.99 * 2.0).epsilon(1e-9));

    RenderOptions no_depth;
    CHECK(rasterize(s, intr, RigidTransform::identity(), no_depth).depth.empty());
}

TEST_CASE("mismatched gradient buffers are rejected") {
    Rng rng(76);
    const CameraIntrinsics intr = test_intrinsics(9);
    const PosedSplats s = random_splats(3, rng);
    SplatWorkspace ws;
    rasterize(s, intr, RigidTransform::identity(), RenderOptions{}, &ws);
    ImageGrad dpix;
    dpix.resize(4);  // wrong size
    CHECK_THROWS(rasterize_backward(s, intr, RigidTransform::identity(), ws, dpix));
}
