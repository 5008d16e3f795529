#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace jgs {

// Flat key = value run configuration (TOML-compatible subset: comments with
// '#', strings quoted, no tables). Unknown keys are rejected; every field
// has a documented default. serialize() followed by parse() reproduces the
// struct exactly.
struct RunConfig {
    // scene generation
    int64_t seed = 1;
    int frames = 20;
    int image_width = 64;
    int image_height = 64;
    int joints = 24;
    int n_human = 2000;       // paper-scale: 110000
    int n_background = 3000;  // paper-scale: 10000..50000
    int n_surface_vertices = 600;
    double body_height = 1.6;
    double capsule_radius_scale = 1.0;
    double motion_amplitude = 0.25;       // radians, per-joint sinusoid peak
    double nonrigid_amplitude = 0.0;      // scene units of non-LBS ground-truth motion
    double nonrigid_spatial_freq = 1.2;
    double nonrigid_temporal_freq = 1.0;
    double camera_orbit_deg = 70.0;
    double camera_distance = 2.4;
    double camera_height = 1.1;
    double fov_deg = 55.0;
    double texture_freq = 3.0;            // background texture, cycles per scene unit
    double noise_sigma = 0.0;             // init corruption, normalized scale
    bool perturb_beta = false;

    // model
    int sh_degree = 1;  // 0..3
    int hash_levels = 8;
    int hash_table_size = 16384;  // 2^14 entries per level
    int hash_features = 2;
    double hash_base_resolution = 16.0;
    double hash_growth = 1.5;
    int freq_time_L = 4;
    int freq_pos_L = 6;
    int mlp_hidden = 64;
    bool use_hash_encoding = true;
    // Masks are the ground-truth human alpha. The binary variant thresholds
    // at 0.5, emulating hard segmentation masks, but biases the silhouette
    // term away from the true pose; the soft variant is the default here.
    bool mask_binary = false;

    // loss weights
    double lambda_rgb = 1.0;
    double lambda_ssim = 0.4;
    double lambda_lpips = 0.2;  // effective only with a perceptual plugin
    double lambda_mask = 0.01;
    double lambda_lbs = 20.0;
    double lambda_smpl = 0.005;
    double lambda_dyn = 0.01;
    double lambda_bg = 1.0;
    double lambda_human = 1.0;

    // training schedule
    int64_t iters_warmup = 5000;
    int64_t iters_independent = 5000;
    int64_t iters_joint = 5000;
    double lr_bg_position = 1.6e-4;
    double lr_bg_rotation = 0.0025;
    double lr_bg_scale = 0.005;
    double lr_bg_opacity = 0.05;
    double lr_bg_color = 0.001;
    double lr_human_position = 1.6e-4;
    double lr_human_attr = 0.001;
    double lr_net = 0.001;
    double lr_camera = 0.001;
    double lr_theta = 0.001;
    double lr_beta = 0.001;
    bool disable_dynamics = false;
    bool disable_synergistic = false;
    int checkpoint_interval = 500;
    int psnr_interval = 100;

    // robustness sweep
    std::string sigmas = "0,0.005,0.01,0.015,0.02";
    std::string sweep_modes = "joint,frozen";
    int sweep_seeds = 3;

    std::string out_dir = "out";

    void validate() const;
    std::string serialize() const;
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
};

std::vector<double> parse_double_list(const std::string& csv);
std::vector<std::string> parse_string_list(const std::string& csv);

}  // namespace jgs
