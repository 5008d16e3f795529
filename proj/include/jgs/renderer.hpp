#pragma once

#include <Eigen/Dense>
#include <vector>

#include "jgs/core_math.hpp"

namespace jgs {

struct ImageBuffer {
    int width = 0, height = 0;
    std::vector<double> rgb;    // 3 per pixel, linear
    std::vector<double> alpha;  // 1 per pixel
    std::vector<double> depth;  // 1 per pixel when enabled, else empty

    void resize(int w, int h, bool with_depth = false);
    int pixels() const { return width * height; }
    double* px(int x, int y) { return &rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
    const double* px(int x, int y) const {
        return &rgb[3 * (static_cast<std::size_t>(y) * width + x)];
    }
    double& alpha_at(int x, int y) { return alpha[static_cast<std::size_t>(y) * width + x]; }
    double alpha_at(int x, int y) const { return alpha[static_cast<std::size_t>(y) * width + x]; }
};

// Fixed rasterization constants (standard splatting practice).
inline constexpr double kDilation = 0.3;          // low-pass term added to the 2D covariance, px^2
inline constexpr double kAlphaClamp = 0.99;       // per-splat alpha ceiling
inline constexpr double kAlphaMin = 1.0 / 255.0;  // contributions below this are skipped
inline constexpr double kSigmaCutoff = 3.0;       // ellipse cut, in standard deviations
inline constexpr double kMinTransmittance = 1e-4; // front-to-back early stop
inline constexpr double kMinCovDet = 1e-12;       // singular 2D covariance -> cull

struct RenderOptions {
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    bool with_depth = false;
};

// World-space splats ready for projection.
struct PosedSplats {
    std::vector<Eigen::Vector3d> position;
    std::vector<Eigen::Matrix3d> covariance;
    std::vector<double> opacity;
    std::vector<Eigen::Vector3d> color;

    int size() const { return static_cast<int>(position.size()); }
    void resize(int n);
};

struct SplatRecord {
    int splat;     // index into the splat arrays
    double alpha;  // clamped opacity * falloff at this pixel
    double trans;  // transmittance in front of this contribution
};

// Everything the backward pass needs to replay the forward compositing
// exactly: per-splat projection data plus per-pixel blending records in
// composition order.
struct SplatWorkspace {
    int width = 0, height = 0;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    std::vector<char> visible;
    std::vector<Eigen::Vector2d> mean2d;
    std::vector<double> depth;
    std::vector<Eigen::Matrix2d> conic;  // inverse of the dilated 2D covariance
    std::vector<int> order;              // visible splats sorted by (depth, index)
    std::vector<int> offset;             // pixels + 1, CSR into records
    std::vector<SplatRecord> records;
    std::vector<int> used;               // records composited before early stop
    std::vector<double> final_trans;
};

struct ImageGrad {
    std::vector<double> rgb;    // 3 per pixel
    std::vector<double> alpha;  // 1 per pixel
    void resize(int pixels) {
        rgb.assign(3 * static_cast<std::size_t>(pixels), 0.0);
        alpha.assign(pixels, 0.0);
    }
};

struct RasterGrads {
    std::vector<Eigen::Vector3d> position;
    std::vector<Eigen::Matrix3d> covariance;  // symmetric
    std::vector<double> opacity;
    std::vector<Eigen::Vector3d> color;
    Eigen::Matrix3d cam_rot = Eigen::Matrix3d::Zero();     // dL/d(world->cam rotation)
    Eigen::Vector3d cam_trans = Eigen::Vector3d::Zero();   // dL/d(world->cam translation)
};

// Front-to-back alpha compositing of depth-sorted splats. Ties in depth are
// broken by index; same inputs give a bit-identical image.
ImageBuffer rasterize(const PosedSplats& splats, const CameraIntrinsics& intrinsics,
                      const RigidTransform& world_to_cam, const RenderOptions& options,
                      SplatWorkspace* workspace = nullptr);

ImageBuffer rasterize(const PosedSplats& splats, const CameraState& camera,
                      const RenderOptions& options, SplatWorkspace* workspace = nullptr);

// Exact reverse mode of `rasterize` for the recorded forward pass, including
// the camera path (projection and the world->camera rotation inside the 2D
// covariance).
RasterGrads rasterize_backward(const PosedSplats& splats, const CameraIntrinsics& intrinsics,
                               const RigidTransform& world_to_cam,
                               const SplatWorkspace& workspace, const ImageGrad& grad_image);

}  // namespace jgs
