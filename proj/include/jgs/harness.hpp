#pragma once

#include <cstdint>
#include <vector>

#include "jgs/config.hpp"
#include "jgs/scene_model.hpp"

namespace jgs {

struct NoiseSpec {
    double sigma = 0.0;         // normalized: radians for rotations, scene-radius
                                // fractions for translations
    bool perturb_beta = false;  // off by default; rotations of theta always perturbed
};

// A generated ground-truth sequence plus the corrupted initialization the
// optimizer starts from. Masks are the alpha channel of the ground-truth
// human-only render (float; thresholded at use time when binary masks are
// requested).
struct SceneBundle {
    RunConfig config;
    int frames = 0;
    double scene_radius = 1.0;
    uint64_t seed = 0;

    Skeleton skeleton;
    GaussianSet gt_human;
    GaussianSet gt_background;
    std::vector<std::vector<double>> gt_theta;  // per frame, 3K+3
    std::vector<double> gt_beta;
    std::vector<CameraState> gt_cameras;
    NonRigidField nonrigid;

    std::vector<ImageBuffer> images;         // ground-truth frames (full render)
    std::vector<std::vector<double>> masks;  // per frame, float alpha of the human render

    std::vector<std::vector<double>> init_theta;
    std::vector<double> init_beta;
    std::vector<CameraState> init_cameras;

    std::vector<double> binary_mask(int frame) const;  // thresholded at 0.5
};

SceneBundle generate_scene(const RunConfig& config);

// Adds i.i.d. Gaussian noise to camera poses (axis-angle, translation scaled
// by the scene radius) and to the per-joint rotations of theta. sigma = 0
// reproduces the ground truth exactly.
void perturb_init(SceneBundle& bundle, const NoiseSpec& noise, uint64_t seed);

// Ground-truth model view of the bundle (zero-initialized dynamics).
SceneModel gt_model(const SceneBundle& bundle);

// Renders a ground-truth frame with the same renderer used everywhere else.
FrameRender render_gt_frame(const SceneBundle& bundle, int frame, RenderMode mode);

// Fresh trainable model: Gaussians re-initialized from the body surface and
// the background point cloud, cameras and body parameters from the (noisy)
// initialization stored in the bundle.
SceneModel initial_model(const SceneBundle& bundle);

// 10 log10(1 / MSE) over rgb in [0,1]; identical images give +infinity.
double psnr(const ImageBuffer& a, const ImageBuffer& b);
double ssim_metric(const ImageBuffer& a, const ImageBuffer& b);

enum class Split { train, val, test };
Split split_of(int frame);  // 80/10/10 interleaved by frame index
std::vector<int> frames_of_split(int total_frames, Split split);

// Mean over frames and joints of the posed joint-position error between two
// parameter sets.
double mean_joint_position_error(const Skeleton& skel,
                                 const std::vector<std::vector<double>>& theta_a,
                                 const std::vector<double>& beta_a,
                                 const std::vector<std::vector<double>>& theta_b,
                                 const std::vector<double>& beta_b);

// Ground-truth image composited onto white through the mask, the reference
// for human-only evaluation.
ImageBuffer composite_on_white(const ImageBuffer& image, const std::vector<double>& mask);

}  // namespace jgs
