#pragma once

#include <string>
#include <vector>

#include "jgs/harness.hpp"
#include "jgs/optim.hpp"

namespace jgs {

struct EvalRow {
    std::string split;
    std::string mode;  // "full" or "human"
    double psnr = 0.0;
    double ssim = 0.0;
};

// PSNR/SSIM per split. Full-image metrics compare the full render against the
// stored frame; human metrics composite both onto white through the mask.
// use_gt_params renders held-out frames with ground-truth cameras and poses
// (measuring the fitted fields); otherwise the model's own per-frame
// parameters are used.
std::vector<EvalRow> evaluate_model(const SceneBundle& bundle, const SceneModel& model,
                                    bool use_gt_params = true);

// Mean human-only PSNR/SSIM on the given frames.
void human_metrics(const SceneBundle& bundle, const SceneModel& model,
                   const std::vector<int>& frames, bool use_gt_params, double& out_psnr,
                   double& out_ssim);

struct SweepRow {
    double sigma = 0.0;
    std::string mode;  // "joint" or "frozen"
    uint64_t seed = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

// Robustness-to-initialization sweep: trains one model per (sigma, mode,
// seed) cell and reports test-split human PSNR. "frozen" disables the
// synergistic refinement (cameras/body fixed at their corrupted
// initialization). Rows come back sorted by (sigma, mode, seed).
std::vector<SweepRow> robustness_sweep(const RunConfig& base, const std::vector<double>& sigmas,
                                       const std::vector<std::string>& modes, int n_seeds,
                                       std::ostream* progress = nullptr);

std::string sweep_tsv(const std::vector<SweepRow>& rows);  // header: sigma mode seed psnr ssim
void write_sweep_tsv(const std::string& path, const std::vector<SweepRow>& rows);

struct CameraRecoveryResult {
    double initial_rot_err_deg = 0.0;   // mean over frames
    double initial_trans_err = 0.0;     // fraction of scene radius
    double final_rot_err_deg = 0.0;
    double final_trans_err = 0.0;
};

// Static-scene camera refinement: ground-truth background Gaussians, camera
// bases corrupted with the given sigma, only the per-frame corrections
// optimized through the background photometric loss.
CameraRecoveryResult camera_recovery_experiment(const RunConfig& base, uint64_t seed,
                                                double sigma, int iterations);

struct PoseRecoveryResult {
    double initial_mjpe = 0.0;  // mean joint position error, scene units
    double final_mjpe = 0.0;
};

// Body-pose refinement: ground-truth Gaussian fields and cameras, per-frame
// joint rotations corrupted with the given sigma, only theta optimized
// through the human photometric + silhouette loss.
PoseRecoveryResult pose_recovery_experiment(const RunConfig& base, uint64_t seed, double sigma,
                                            int iterations);

}  // namespace jgs
