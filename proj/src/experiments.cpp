#include "jgs/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace jgs {

namespace {

FrameRender render_eval(const SceneBundle& bundle, const SceneModel& model, int frame,
                        RenderMode mode, bool use_gt_params) {
    if (use_gt_params)
        return render_composite(model, frame, mode, RenderSettings{}, nullptr,
                                &bundle.gt_cameras[frame], bundle.gt_theta[frame].data());
    return render_composite(model, frame, mode);
}

}  // namespace

void human_metrics(const SceneBundle& bundle, const SceneModel& model,
                   const std::vector<int>& frames, bool use_gt_params, double& out_psnr,
                   double& out_ssim) {
    if (frames.empty()) throw std::invalid_argument("human_metrics: no frames");
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (int t : frames) {
        const FrameRender fr =
            render_eval(bundle, model, t, RenderMode::human_only_white, use_gt_params);
        const ImageBuffer ref = composite_on_white(bundle.images[t], bundle.masks[t]);
        psnr_sum += psnr(ref, fr.image);
        ssim_sum += ssim_metric(ref, fr.image);
    }
    out_psnr = psnr_sum / frames.size();
    out_ssim = ssim_sum / frames.size();
}

std::vector<EvalRow> evaluate_model(const SceneBundle& bundle, const SceneModel& model,
                                    bool use_gt_params) {
    std::vector<EvalRow> rows;
    const Split splits[] = {Split::train, Split::val, Split::test};
    const char* names[] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s) {
        const auto frames = frames_of_split(bundle.frames, splits[s]);
        if (frames.empty()) continue;
        {
            EvalRow row;
            row.split = names[s];
            row.mode = "full";
            double psnr_sum = 0.0, ssim_sum = 0.0;
            for (int t : frames) {
                const FrameRender fr =
                    render_eval(bundle, model, t, RenderMode::full, use_gt_params);
                psnr_sum += psnr(bundle.images[t], fr.image);
                ssim_sum += ssim_metric(bundle.images[t], fr.image);
            }
            row.psnr = psnr_sum / frames.size();
            row.ssim = ssim_sum / frames.size();
            rows.push_back(row);
        }
        if (model.human.count > 0) {
            EvalRow row;
            row.split = names[s];
            row.mode = "human";
            human_metrics(bundle, model, frames, use_gt_params, row.psnr, row.ssim);
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<SweepRow> robustness_sweep(const RunConfig& base, const std::vector<double>& sigmas,
                                       const std::vector<std::string>& modes, int n_seeds,
                                       std::ostream* progress) {
    for (const auto& m : modes)
        if (m != "joint" && m != "frozen")
            throw std::invalid_argument("robustness_sweep: mode must be joint or frozen");

    std::vector<SweepRow> rows;
    for (double sigma : sigmas) {
        for (const auto& mode : modes) {
            for (int s = 0; s < n_seeds; ++s) {
                RunConfig cfg = base;
                cfg.seed = base.seed + s;
                cfg.noise_sigma = sigma;
                cfg.disable_synergistic = mode == "frozen";
                if (progress)
                    (*progress) << "[sweep] sigma=" << sigma << " mode=" << mode
                                << " seed=" << cfg.seed << std::endl;
                const SceneBundle bundle = generate_scene(cfg);
                const TrainResult tr = train(bundle, cfg);
                SweepRow row;
                row.sigma = sigma;
                row.mode = mode;
                row.seed = static_cast<uint64_t>(cfg.seed);
                const auto test_frames = frames_of_split(bundle.frames, Split::test);
                const auto frames = test_frames.empty()
                                        ? frames_of_split(bundle.frames, Split::train)
                                        : test_frames;
                human_metrics(bundle, tr.model, frames, /*use_gt_params=*/true, row.psnr,
                              row.ssim);
                rows.push_back(row);
            }
        }
    }
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.sigma != b.sigma) return a.sigma < b.sigma;
        if (a.mode != b.mode) return a.mode < b.mode;
        return a.seed < b.seed;
    });
    return rows;
}

std::string sweep_tsv(const std::vector<SweepRow>& rows) {
    std::string out = "sigma\tmode\tseed\tpsnr\tssim\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.9g\t%s\t%llu\t%.9g\t%.9g\n", r.sigma, r.mode.c_str(),
                      static_cast<unsigned long long>(r.seed), r.psnr, r.ssim);
        out += buf;
    }
    return out;
}

void write_sweep_tsv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_sweep_tsv: cannot write " + path);
    f << sweep_tsv(rows);
}

namespace {

double mean_camera_rot_err_deg(const SceneModel& model, const SceneBundle& bundle) {
    double sum = 0.0;
    for (int t = 0; t < bundle.frames; ++t) {
        const Rotation eff = model.cameras[t].effective().rotation;
        const Rotation gt = bundle.gt_cameras[t].effective().rotation;
        sum += eff.angle_to(gt) * 180.0 / M_PI;
    }
    return sum / bundle.frames;
}

double mean_camera_trans_err(const SceneModel& model, const SceneBundle& bundle) {
    double sum = 0.0;
    for (int t = 0; t < bundle.frames; ++t)
        sum += (model.cameras[t].effective().translation -
                bundle.gt_cameras[t].effective().translation)
                   .norm();
    return sum / bundle.frames / bundle.scene_radius;
}

}  // namespace

CameraRecoveryResult camera_recovery_experiment(const RunConfig& base, uint64_t seed,
                                                double sigma, int iterations) {
    RunConfig cfg = base;
    cfg.seed = static_cast<int64_t>(seed);
    cfg.n_human = 0;  // static scene
    cfg.noise_sigma = sigma;
    SceneBundle bundle = generate_scene(cfg);

    // ground-truth Gaussians, corrupted camera bases, zero corrections
    SceneModel model = gt_model(bundle);
    model.cameras = bundle.init_cameras;

    std::vector<AdamState> adam(bundle.frames);
    for (auto& st : adam) st.init(6);

    CameraRecoveryResult result;
    result.initial_rot_err_deg = mean_camera_rot_err_deg(model, bundle);
    result.initial_trans_err = mean_camera_trans_err(model, bundle);

    ModelGrads grads;
    grads.resize_for(model);
    GradSinkMask sink = GradSinkMask::none();
    sink.camera = true;

    for (int it = 0; it < iterations; ++it) {
        const int frame = it % bundle.frames;
        const FrameRender fr = render_composite(model, frame, RenderMode::background_only);
        ImageGrad dpix;
        dpix.resize(fr.image.pixels());
        const std::vector<double> mask =
            cfg.mask_binary ? bundle.binary_mask(frame) : bundle.masks[frame];
        background_loss(bundle.images[frame], fr.image, mask, &dpix, 1.0);
        grads.clear();
        render_backward(model, fr, dpix, sink, grads);
        adam_step(adam[frame], param_lane(model, ParamGroup::camera, frame),
                  {grads.camera[frame].data(), 6}, base.lr_camera, AdamConfig{}, "camera");
    }

    result.final_rot_err_deg = mean_camera_rot_err_deg(model, bundle);
    result.final_trans_err = mean_camera_trans_err(model, bundle);
    return result;
}

PoseRecoveryResult pose_recovery_experiment(const RunConfig& base, uint64_t seed, double sigma,
                                            int iterations) {
    RunConfig cfg = base;
    cfg.seed = static_cast<int64_t>(seed);
    cfg.noise_sigma = sigma;
    SceneBundle bundle = generate_scene(cfg);

    SceneModel model = gt_model(bundle);
    model.theta = bundle.init_theta;  // corrupted poses, everything else ground truth

    const int dim = model.skeleton.theta_dim();
    std::vector<AdamState> adam(bundle.frames);
    for (auto& st : adam) st.init(dim);

    PoseRecoveryResult result;
    result.initial_mjpe = mean_joint_position_error(bundle.skeleton, model.theta, model.beta,
                                                    bundle.gt_theta, bundle.gt_beta);

    ModelGrads grads;
    grads.resize_for(model);
    GradSinkMask sink = GradSinkMask::none();
    sink.theta = true;

    for (int it = 0; it < iterations; ++it) {
        const int frame = it % bundle.frames;
        const FrameRender fr = render_composite(model, frame, RenderMode::human_only_white);
        ImageGrad dpix;
        dpix.resize(fr.image.pixels());
        const std::vector<double> mask =
            cfg.mask_binary ? bundle.binary_mask(frame) : bundle.masks[frame];
        human_loss(bundle.images[frame], fr.image, mask, &dpix, 1.0);
        grads.clear();
        render_backward(model, fr, dpix, sink, grads);
        const double u = static_cast<double>(it) / iterations;
        const double lr = base.lr_theta * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(M_PI * u)));
        adam_step(adam[frame], param_lane(model, ParamGroup::theta, frame),
                  {grads.theta[frame].data(), grads.theta[frame].size()}, lr, AdamConfig{},
                  "theta");
    }

    result.final_mjpe = mean_joint_position_error(bundle.skeleton, model.theta, model.beta,
                                                  bundle.gt_theta, bundle.gt_beta);
    return result;
}

}  // namespace jgs
