#include "jgs/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jgs {

void ImageBuffer::resize(int w, int h, bool with_depth) {
    width = w;
    height = h;
    rgb.assign(3 * static_cast<std::size_t>(w) * h, 0.0);
    alpha.assign(static_cast<std::size_t>(w) * h, 0.0);
    if (with_depth)
        depth.assign(static_cast<std::size_t>(w) * h, 0.0);
    else
        depth.clear();
}

void PosedSplats::resize(int n) {
    position.resize(n);
    covariance.resize(n);
    opacity.resize(n);
    color.resize(n);
}

namespace {

struct ProjectedSplat {
    bool ok = false;
    Eigen::Vector3d p_cam;
    Eigen::Vector2d mean2d;
    Eigen::Matrix2d conic;
    double radius = 0.0;
};

ProjectedSplat project_splat(const Eigen::Vector3d& pos, const Eigen::Matrix3d& cov,
                             const CameraIntrinsics& intr, const Eigen::Matrix3d& rot,
                             const Eigen::Vector3d& trans) {
    ProjectedSplat out;
    out.p_cam = rot * pos + trans;
    if (out.p_cam.z() <= kNearPlane) return out;

    const double z = out.p_cam.z();
    out.mean2d = {intr.fx * out.p_cam.x() / z + intr.cx, intr.fy * out.p_cam.y() / z + intr.cy};

    const Eigen::Matrix<double, 2, 3> v = projection_jacobian(intr, out.p_cam) * rot;
    Eigen::Matrix2d cov2d = v * cov * v.transpose();
    cov2d(0, 0) += kDilation;
    cov2d(1, 1) += kDilation;

    const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
    if (!(det >= kMinCovDet) || !cov2d.allFinite()) return out;

    out.conic << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;
    const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
    const double disc = std::sqrt(std::max(0.0, mid * mid - det));
    out.radius = kSigmaCutoff * std::sqrt(std::max(1e-12, mid + disc));
    out.ok = true;
    return out;
}

struct PixelBounds {
    int x0, x1, y0, y1;  // inclusive
    bool empty;
};

PixelBounds bounds_for(const Eigen::Vector2d& mean, double radius, int w, int h) {
    PixelBounds b;
    b.x0 = static_cast<int>(std::max(0.0, std::floor(mean.x() - radius - 0.5)));
    b.x1 = static_cast<int>(std::min(static_cast<double>(w - 1), std::ceil(mean.x() + radius - 0.5)));
    b.y0 = static_cast<int>(std::max(0.0, std::floor(mean.y() - radius - 0.5)));
    b.y1 = static_cast<int>(std::min(static_cast<double>(h - 1), std::ceil(mean.y() + radius - 0.5)));
    b.empty = b.x0 > b.x1 || b.y0 > b.y1;
    return b;
}

// alpha of `splat` at pixel center (x+0.5, y+0.5); < 0 means skipped
inline double splat_alpha(const Eigen::Vector2d& mean, const Eigen::Matrix2d& conic,
                          double opacity, int x, int y) {
    const double dx = x + 0.5 - mean.x();
    const double dy = y + 0.5 - mean.y();
    const double q = conic(0, 0) * dx * dx + 2.0 * conic(0, 1) * dx * dy + conic(1, 1) * dy * dy;
    if (q > kSigmaCutoff * kSigmaCutoff) return -1.0;
    const double a = std::min(kAlphaClamp, opacity * std::exp(-0.5 * q));
    return a < kAlphaMin ? -1.0 : a;
}

}  // namespace

ImageBuffer rasterize(const PosedSplats& splats, const CameraIntrinsics& intr,
                      const RigidTransform& world_to_cam, const RenderOptions& options,
                      SplatWorkspace* workspace) {
    intr.validate();
    const int w = intr.width, h = intr.height;
    const int n = splats.size();
    const Eigen::Matrix3d rot = world_to_cam.rotation.matrix();
    const Eigen::Vector3d trans = world_to_cam.translation;

    SplatWorkspace local;
    SplatWorkspace& ws = workspace ? *workspace : local;
    ws.width = w;
    ws.height = h;
    ws.background = options.background;
    ws.visible.assign(n, 0);
    ws.mean2d.assign(n, Eigen::Vector2d::Zero());
    ws.depth.assign(n, 0.0);
    ws.conic.assign(n, Eigen::Matrix2d::Zero());
    ws.order.clear();

    std::vector<double> radius(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const ProjectedSplat p =
            project_splat(splats.position[i], splats.covariance[i], intr, rot, trans);
        if (!p.ok) continue;
        ws.visible[i] = 1;
        ws.mean2d[i] = p.mean2d;
        ws.depth[i] = p.p_cam.z();
        ws.conic[i] = p.conic;
        radius[i] = p.radius;
        ws.order.push_back(i);
    }
    std::sort(ws.order.begin(), ws.order.end(), [&](int a, int b) {
        if (ws.depth[a] != ws.depth[b]) return ws.depth[a] < ws.depth[b];
        return a < b;
    });

    const int pixels = w * h;
    std::vector<int> count(pixels, 0);
    for (int i : ws.order) {
        const PixelBounds b = bounds_for(ws.mean2d[i], radius[i], w, h);
        if (b.empty) continue;
        for (int y = b.y0; y <= b.y1; ++y)
            for (int x = b.x0; x <= b.x1; ++x)
                if (splat_alpha(ws.mean2d[i], ws.conic[i], splats.opacity[i], x, y) >= 0.0)
                    ++count[y * w + x];
    }
    ws.offset.assign(pixels + 1, 0);
    for (int p = 0; p < pixels; ++p) ws.offset[p + 1] = ws.offset[p] + count[p];
    ws.records.assign(ws.offset[pixels], SplatRecord{});
    std::vector<int> cursor(ws.offset.begin(), ws.offset.end() - 1);
    for (int i : ws.order) {
        const PixelBounds b = bounds_for(ws.mean2d[i], radius[i], w, h);
        if (b.empty) continue;
        for (int y = b.y0; y <= b.y1; ++y)
            for (int x = b.x0; x <= b.x1; ++x) {
                const double a = splat_alpha(ws.mean2d[i], ws.conic[i], splats.opacity[i], x, y);
                if (a >= 0.0) ws.records[cursor[y * w + x]++] = {i, a, 1.0};
            }
    }

    ImageBuffer img;
    img.resize(w, h, options.with_depth);
    ws.used.assign(pixels, 0);
    ws.final_trans.assign(pixels, 1.0);
    for (int p = 0; p < pixels; ++p) {
        double t = 1.0;
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        double d = 0.0;
        int used = 0;
        for (int r = ws.offset[p]; r < ws.offset[p + 1]; ++r) {
            if (t < kMinTransmittance) break;
            SplatRecord& rec = ws.records[r];
            rec.trans = t;
            c += splats.color[rec.splat] * (rec.alpha * t);
            if (options.with_depth) d += ws.depth[rec.splat] * rec.alpha * t;
            t *= 1.0 - rec.alpha;
            ++used;
        }
        ws.used[p] = used;
        ws.final_trans[p] = t;
        c += options.background * t;
        img.rgb[3 * p] = c.x();
        img.rgb[3 * p + 1] = c.y();
        img.rgb[3 * p + 2] = c.z();
        img.alpha[p] = 1.0 - t;
        if (options.with_depth) img.depth[p] = d;
    }
    return img;
}

ImageBuffer rasterize(const PosedSplats& splats, const CameraState& camera,
                      const RenderOptions& options, SplatWorkspace* workspace) {
    return rasterize(splats, camera.intrinsics, camera.effective(), options, workspace);
}

RasterGrads rasterize_backward(const PosedSplats& splats, const CameraIntrinsics& intr,
                               const RigidTransform& world_to_cam,
                               const SplatWorkspace& ws, const ImageGrad& grad_image) {
    const int n = splats.size();
    const int pixels = ws.width * ws.height;
    if (static_cast<int>(grad_image.rgb.size()) != 3 * pixels ||
        static_cast<int>(grad_image.alpha.size()) != pixels)
        throw std::invalid_argument("rasterize_backward: gradient buffers do not match workspace");

    RasterGrads g;
    g.position.assign(n, Eigen::Vector3d::Zero());
    g.covariance.assign(n, Eigen::Matrix3d::Zero());
    g.opacity.assign(n, 0.0);
    g.color.assign(n, Eigen::Vector3d::Zero());

    // Per-splat screen-space accumulators.
    std::vector<Eigen::Vector2d> d_mean(n, Eigen::Vector2d::Zero());
    std::vector<Eigen::Matrix2d> d_conic(n, Eigen::Matrix2d::Zero());

    for (int p = 0; p < pixels; ++p) {
        const Eigen::Vector3d g_rgb(grad_image.rgb[3 * p], grad_image.rgb[3 * p + 1],
                                    grad_image.rgb[3 * p + 2]);
        const double g_a = grad_image.alpha[p];
        if (g_rgb.isZero(0.0) && g_a == 0.0) continue;

        const double t_final = ws.final_trans[p];
        Eigen::Vector3d suffix = ws.background * t_final;
        const int x = p % ws.width, y = p / ws.width;
        for (int r = ws.offset[p] + ws.used[p] - 1; r >= ws.offset[p]; --r) {
            const SplatRecord& rec = ws.records[r];
            const int i = rec.splat;
            const double a = rec.alpha;
            const double t = rec.trans;

            g.color[i] += g_rgb * (a * t);
            const double one_minus = 1.0 - a;
            double d_alpha = g_rgb.dot(splats.color[i] * t - suffix / one_minus) +
                             g_a * t_final / one_minus;
            suffix += splats.color[i] * (a * t);

            // alpha = min(clamp, opacity * exp(-q/2)); zero slope when clamped
            if (a >= kAlphaClamp) continue;

            const double dx = x + 0.5 - ws.mean2d[i].x();
            const double dy = y + 0.5 - ws.mean2d[i].y();
            const double gexp = a / std::max(splats.opacity[i], 1e-300);  // exp(-q/2)
            g.opacity[i] += d_alpha * gexp;
            const double d_q = d_alpha * (-0.5 * a);
            d_conic[i](0, 0) += d_q * dx * dx;
            d_conic[i](0, 1) += d_q * dx * dy;
            d_conic[i](1, 0) += d_q * dx * dy;
            d_conic[i](1, 1) += d_q * dy * dy;
            const Eigen::Vector2d kd(ws.conic[i](0, 0) * dx + ws.conic[i](0, 1) * dy,
                                     ws.conic[i](1, 0) * dx + ws.conic[i](1, 1) * dy);
            d_mean[i] += d_q * (-2.0) * kd;  // d(q)/d(mean2d) = -2 K d
        }
    }

    const Eigen::Matrix3d rot = world_to_cam.rotation.matrix();
    const Eigen::Vector3d trans = world_to_cam.translation;
    for (int i = 0; i < n; ++i) {
        if (!ws.visible[i]) continue;
        if (d_mean[i].isZero(0.0) && d_conic[i].isZero(0.0) && g.opacity[i] == 0.0 &&
            g.color[i].isZero(0.0))
            continue;

        const Eigen::Vector3d p_cam = rot * splats.position[i] + trans;
        const double z = p_cam.z();
        const Eigen::Matrix<double, 2, 3> j = projection_jacobian(intr, p_cam);
        const Eigen::Matrix<double, 2, 3> v = j * rot;

        // conic = inverse(cov2d): dL/dcov2d = -K dK K
        const Eigen::Matrix2d d_cov2d = -ws.conic[i] * d_conic[i] * ws.conic[i];
        // cov2d = V Sigma V^T + dilation
        g.covariance[i] += v.transpose() * d_cov2d * v;
        const Eigen::Matrix<double, 2, 3> d_v =
            (d_cov2d + d_cov2d.transpose()) * v * splats.covariance[i];
        const Eigen::Matrix<double, 2, 3> d_j = d_v * rot.transpose();
        g.cam_rot += j.transpose() * d_v;

        // projection of the mean
        Eigen::Vector3d d_pcam = j.transpose() * d_mean[i];
        // dependence of J itself on the camera-space point
        const double inv_z2 = 1.0 / (z * z);
        const double inv_z3 = inv_z2 / z;
        d_pcam.x() += d_j(0, 2) * (-intr.fx * inv_z2);
        d_pcam.y() += d_j(1, 2) * (-intr.fy * inv_z2);
        d_pcam.z() += d_j(0, 0) * (-intr.fx * inv_z2) + d_j(1, 1) * (-intr.fy * inv_z2) +
                      d_j(0, 2) * (2.0 * intr.fx * p_cam.x() * inv_z3) +
                      d_j(1, 2) * (2.0 * intr.fy * p_cam.y() * inv_z3);

        g.position[i] += rot.transpose() * d_pcam;
        g.cam_rot += d_pcam * splats.position[i].transpose();
        g.cam_trans += d_pcam;
    }
    return g;
}

}  // namespace jgs
