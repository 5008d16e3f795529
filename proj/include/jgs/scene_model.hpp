#pragma once

#include <array>
#include <span>
#include <vector>

#include "jgs/body.hpp"
#include "jgs/core_math.hpp"
#include "jgs/dynamics.hpp"
#include "jgs/gaussians.hpp"
#include "jgs/renderer.hpp"

namespace jgs {

enum class RenderMode { full, human_only_white, background_only };

struct RenderSettings {
    Eigen::Vector3d clear_color = Eigen::Vector3d::Zero();
    bool with_depth = false;
};

// Smooth additive world-offset field, used by the synthetic harness to give
// ground-truth frames non-rigid motion beyond skinning. Constant with
// respect to all model parameters, so it never appears in gradients.
struct NonRigidField {
    double amplitude = 0.0;
    double spatial_freq = 1.0;
    double temporal_freq = 1.0;
    Eigen::Matrix3d directions = Eigen::Matrix3d::Identity();
    Eigen::Vector3d phase = Eigen::Vector3d::Zero();

    Eigen::Vector3d eval(const Eigen::Vector3d& mu_c, double t_norm) const;
    static NonRigidField make(double amplitude, double spatial_freq, double temporal_freq,
                              uint64_t seed);
};

// Full learnable state: both Gaussian fields, per-frame camera corrections,
// per-frame body poses with shared shape, and the temporal network.
struct SceneModel {
    GaussianSet human;  // count 0 allowed (background-only scenes)
    GaussianSet background;
    Skeleton skeleton;
    std::vector<std::vector<double>> theta;  // per frame, 3K+3
    std::vector<double> beta;                // K
    std::vector<CameraState> cameras;        // per frame
    TemporalNet net;
    bool dynamics_enabled = true;

    int frames() const { return static_cast<int>(cameras.size()); }
    double t_norm(int frame) const {
        return frames() > 0 ? static_cast<double>(frame) / frames() : 0.0;
    }
    void validate() const;
};

enum class ParamGroup : int {
    bg_position = 0,
    bg_rotation,
    bg_scale,
    bg_opacity,
    bg_color,
    human_position,
    human_rotation,
    human_scale,
    human_opacity,
    human_color,
    human_lbs,
    net_offset,
    net_color,
    net_hash,
    camera,
    theta,
    beta,
};
inline constexpr int kNumParamGroups = 17;
const char* param_group_name(ParamGroup g);
extern const std::array<ParamGroup, kNumParamGroups> kAllParamGroups;

// camera and theta are per-frame lanes; everything else is a single lane.
int lane_count(const SceneModel& model, ParamGroup g);
std::span<double> param_lane(SceneModel& model, ParamGroup g, int lane);
std::span<const double> param_lane(const SceneModel& model, ParamGroup g, int lane);

struct GradSinkMask {
    bool human_gaussians = true;
    bool bg_gaussians = true;
    bool camera = true;
    bool theta = true;
    bool beta = true;
    bool net = true;

    static GradSinkMask all() { return {}; }
    static GradSinkMask none() { return {false, false, false, false, false, false}; }
};

struct GaussianGrads {
    std::vector<double> mu, rot, log_scale, opacity, sh, lbs;
    void resize_for(const GaussianSet& set);
    void clear();
};

// Gradient buffers mirroring the model parameters. `touched` records which
// groups received deposits since the last clear, which is what the stage
// gating tests instrument.
struct ModelGrads {
    GaussianGrads human, background;
    std::vector<double> net_offset, net_color, net_hash;
    std::vector<std::vector<double>> camera;  // per frame, 6
    std::vector<std::vector<double>> theta;   // per frame, 3K+3
    std::vector<double> beta;
    std::array<bool, kNumParamGroups> touched{};

    void resize_for(const SceneModel& model);
    void clear();
    void mark(ParamGroup g) { touched[static_cast<int>(g)] = true; }
    bool is_touched(ParamGroup g) const { return touched[static_cast<int>(g)]; }
    std::span<double> lane(ParamGroup g, int lane);
    void accumulate(const ModelGrads& other);
    double max_abs(ParamGroup g) const;
};

// One rendered frame plus every intermediate the backward pass needs.
struct FrameRender {
    RenderMode mode = RenderMode::full;
    int frame = 0;
    double t_norm = 0.0;
    bool overridden = false;  // rendered with override camera/pose; no backward
    int n_human = 0, n_bg = 0;

    CameraIntrinsics intrinsics;
    RigidTransform cam_eff;
    Eigen::Matrix3d cam_rot_eff = Eigen::Matrix3d::Identity();
    Eigen::Vector3d cam_center = Eigen::Vector3d::Zero();

    FkCache fk;
    std::vector<double> weights;            // n_human * K
    std::vector<Eigen::Matrix3d> blend;     // sum_k w_k A_k
    std::vector<Eigen::Matrix3d> rot_c;     // canonical rotations
    std::vector<Eigen::Matrix3d> m;         // blend * rot_c
    std::vector<Eigen::Matrix3d> m_prime;   // m * delta_rot
    std::vector<Eigen::Vector3d> p_lbs;
    std::vector<Eigen::Matrix3d> delta_rot;
    bool dynamics_used = false;
    NetForwardCache net_cache;

    std::vector<double> sh_basis_vals;      // per splat, coeffs
    std::vector<Eigen::Vector3d> view_dir;  // per splat
    std::vector<double> view_dist;          // per splat

    PosedSplats splats;  // human splats first, then background
    SplatWorkspace ws;
    ImageBuffer image;
};

FrameRender render_composite(const SceneModel& model, int frame, RenderMode mode,
                             const RenderSettings& settings = {},
                             const NonRigidField* nonrigid = nullptr,
                             const CameraState* camera_override = nullptr,
                             const double* theta_override = nullptr);

// Full reverse mode from per-pixel gradients down to every parameter group,
// deposited into `grads` subject to the sink mask.
void render_backward(const SceneModel& model, const FrameRender& fr, const ImageGrad& grad_image,
                     const GradSinkMask& mask, ModelGrads& grads);

}  // namespace jgs
