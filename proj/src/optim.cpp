#include "jgs/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "jgs/rng.hpp"

namespace jgs {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const AdamConfig& config, const char* group_name) {
    if (params.size() != grads.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw std::invalid_argument(std::string("adam_step: shape mismatch in group ") +
                                    group_name);
    for (double g : grads)
        if (!std::isfinite(g))
            throw std::runtime_error(std::string("adam_step: non-finite gradient in group ") +
                                     group_name);
    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::warmup: return "warmup";
        case Stage::independent: return "independent";
        case Stage::joint: return "joint";
    }
    return "?";
}

StageSchedule StageSchedule::from_config(const RunConfig& c) {
    StageSchedule s;
    s.warmup_iters = c.iters_warmup;
    s.independent_iters = c.iters_independent;
    s.joint_iters = c.iters_joint;
    auto set = [&](ParamGroup g, double lr) { s.base_lr[static_cast<int>(g)] = lr; };
    set(ParamGroup::bg_position, c.lr_bg_position);
    set(ParamGroup::bg_rotation, c.lr_bg_rotation);
    set(ParamGroup::bg_scale, c.lr_bg_scale);
    set(ParamGroup::bg_opacity, c.lr_bg_opacity);
    set(ParamGroup::bg_color, c.lr_bg_color);
    set(ParamGroup::human_position, c.lr_human_position);
    set(ParamGroup::human_rotation, c.lr_human_attr);
    set(ParamGroup::human_scale, c.lr_human_attr);
    set(ParamGroup::human_opacity, c.lr_human_attr);
    set(ParamGroup::human_color, c.lr_human_attr);
    set(ParamGroup::human_lbs, c.lr_human_attr);
    set(ParamGroup::net_offset, c.lr_net);
    set(ParamGroup::net_color, c.lr_net);
    set(ParamGroup::net_hash, c.lr_net);
    set(ParamGroup::camera, c.lr_camera);
    set(ParamGroup::theta, c.lr_theta);
    set(ParamGroup::beta, c.lr_beta);
    return s;
}

Stage stage_of(const StageSchedule& schedule, int64_t iter) {
    if (iter < 0 || iter >= schedule.total())
        throw std::out_of_range("stage_of: iteration outside the schedule");
    if (iter < schedule.warmup_iters) return Stage::warmup;
    if (iter < schedule.warmup_iters + schedule.independent_iters) return Stage::independent;
    return Stage::joint;
}

double lr_at(const StageSchedule& schedule, ParamGroup group, int64_t iter) {
    if (iter < 0 || iter > schedule.total())
        throw std::out_of_range("lr_at: iteration outside the schedule");
    const double base = schedule.base_lr_of(group);
    const int64_t joint_start = schedule.warmup_iters + schedule.independent_iters;
    if (iter < joint_start || schedule.joint_iters == 0) return base;
    const double u = static_cast<double>(iter - joint_start) /
                     static_cast<double>(schedule.joint_iters);
    if (u >= 1.0) return 0.1 * base;
    return 0.1 * base + 0.9 * base * 0.5 * (1.0 + std::cos(M_PI * u));
}

GatingConfig gating_for(Stage stage, bool disable_dynamics, bool disable_synergistic) {
    GatingConfig g;
    g.human_gaussians = true;
    g.bg_gaussians = true;
    switch (stage) {
        case Stage::warmup:
            break;
        case Stage::independent:
            g.camera = true;
            g.theta = true;
            g.camera_from_bg_only = true;
            g.theta_from_human_only = true;
            break;
        case Stage::joint:
            g.camera = true;
            g.theta = true;
            g.beta = true;
            g.net = true;
            break;
    }
    if (disable_dynamics) g.net = false;
    if (disable_synergistic) {
        g.camera = false;
        g.theta = false;
        g.beta = false;
    }
    return g;
}

std::string metrics_log_header() {
    return "iter\tstage\tl1\tssim\tlpips\tmask\tlbs\tcanonical\tdyn\tbg\thuman\ttotal\tpsnr";
}

std::string format_log_record(const LogRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%lld\t%s\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g",
                  static_cast<long long>(r.iter), stage_name(r.stage), r.losses.l1,
                  r.losses.ssim, r.losses.lpips, r.losses.mask, r.losses.lbs,
                  r.losses.canonical, r.losses.dyn, r.losses.bg, r.losses.human, r.losses.total,
                  r.psnr);
    return buf;
}

void write_metrics_log(const std::string& path, const std::vector<LogRecord>& log) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_metrics_log: cannot write " + path);
    f << metrics_log_header() << "\n";
    for (const auto& r : log) f << format_log_record(r) << "\n";
}

namespace {

uint64_t mix_seed(uint64_t base, uint64_t salt) {
    uint64_t z = base + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

LossWeights weights_from_config(const RunConfig& c) {
    LossWeights w;
    w.rgb = c.lambda_rgb;
    w.ssim = c.lambda_ssim;
    w.lpips = c.lambda_lpips;
    w.mask = c.lambda_mask;
    w.lbs = c.lambda_lbs;
    w.smpl = c.lambda_smpl;
    w.dyn = c.lambda_dyn;
    w.bg = c.lambda_bg;
    w.human = c.lambda_human;
    w.validate();
    return w;
}

struct AdamBank {
    std::vector<std::vector<AdamState>> states;  // [group][lane]

    void init(const SceneModel& model) {
        states.resize(kNumParamGroups);
        for (ParamGroup g : kAllParamGroups) {
            const int lanes = lane_count(model, g);
            auto& group = states[static_cast<int>(g)];
            group.resize(lanes);
            for (int l = 0; l < lanes; ++l)
                group[l].init(param_lane(model, g, l).size());
        }
    }
};

// Validation-frame quality under ground-truth parameters: measures the
// fitted fields, not the (never-optimized) held-out pose entries.
double heldout_psnr(const SceneBundle& bundle, const SceneModel& model, int frame) {
    FrameRender fr = render_composite(model, frame, RenderMode::full, RenderSettings{}, nullptr,
                                      &bundle.gt_cameras[frame], bundle.gt_theta[frame].data());
    return psnr(bundle.images[frame], fr.image);
}

}  // namespace

TrainResult train(const SceneBundle& bundle, const RunConfig& config, const TrainHooks& hooks,
                  int64_t max_iters) {
    config.validate();
    const LossWeights weights = weights_from_config(config);
    const StageSchedule schedule = StageSchedule::from_config(config);

    TrainResult result;
    result.model = initial_model(bundle);
    SceneModel& model = result.model;

    AdamBank adam;
    adam.init(model);

    const std::vector<int> train_frames = frames_of_split(bundle.frames, Split::train);
    const std::vector<int> val_frames = frames_of_split(bundle.frames, Split::val);
    if (train_frames.empty()) throw std::runtime_error("train: no training frames");
    const int heldout = val_frames.empty() ? train_frames.front() : val_frames.front();

    const KdTree3 surface_tree(model.skeleton.vertices);

    const int64_t total = max_iters >= 0 ? std::min<int64_t>(max_iters, schedule.total())
                                         : schedule.total();
    result.log.reserve(total);

    // NaN guard: snapshot of the last known-good state
    SceneModel snapshot = model;
    std::vector<std::vector<AdamState>> snapshot_adam = adam.states;
    int64_t snapshot_iter = 0;

    ModelGrads path_grads, total_grads;
    path_grads.resize_for(model);
    total_grads.resize_for(model);

    std::vector<int> frame_order;
    int64_t epoch = -1;

    auto reshuffle = [&](int64_t e) {
        frame_order = train_frames;
        Rng rng(mix_seed(static_cast<uint64_t>(config.seed), 0xF0A3 + static_cast<uint64_t>(e)));
        for (int i = static_cast<int>(frame_order.size()) - 1; i > 0; --i)
            std::swap(frame_order[i], frame_order[rng.uniform_int(i + 1)]);
    };

    for (int64_t iter = 0; iter < total; ++iter) {
        const int64_t e = iter / static_cast<int64_t>(train_frames.size());
        if (e != epoch) {
            epoch = e;
            reshuffle(epoch);
        }
        const int frame = frame_order[iter % train_frames.size()];
        const Stage stage = stage_of(schedule, iter);
        const GatingConfig gate =
            gating_for(stage, config.disable_dynamics, config.disable_synergistic);

        const std::vector<double> mask =
            config.mask_binary ? bundle.binary_mask(frame) : bundle.masks[frame];
        const ImageBuffer& gt = bundle.images[frame];

        total_grads.clear();
        LossReport report;

        auto run_path = [&](const char* name, const FrameRender& fr, const ImageGrad& dpix,
                            const GradSinkMask& sink) {
            path_grads.clear();
            render_backward(model, fr, dpix, sink, path_grads);
            if (hooks.path_observer) hooks.path_observer(iter, stage, name, path_grads, sink);
            total_grads.accumulate(path_grads);
        };

        // ---- full render: photometric fit of the composed scene ----
        {
            FrameRender fr = render_composite(model, frame, RenderMode::full);
            ImageGrad dpix;
            dpix.resize(fr.image.pixels());
            render_loss(gt, fr.image, weights, hooks.perceptual, &dpix, report);
            GradSinkMask sink;
            sink.human_gaussians = gate.human_gaussians;
            sink.bg_gaussians = gate.bg_gaussians;
            sink.camera = gate.camera && !gate.camera_from_bg_only;
            sink.theta = gate.theta && !gate.theta_from_human_only;
            sink.beta = gate.beta;
            sink.net = gate.net;
            run_path("render", fr, dpix, sink);

            // dynamics magnitude regularizer rides on the same forward pass
            GradSinkMask dyn_sink = sink;
            path_grads.clear();
            report.dyn = dynamics_regularizer(model, fr, weights.dyn, dyn_sink, &path_grads);
            if (hooks.path_observer && model.dynamics_enabled)
                hooks.path_observer(iter, stage, "dyn_reg", path_grads, dyn_sink);
            total_grads.accumulate(path_grads);
        }

        // ---- human-only render: segmentation prior + human photometric path ----
        if (model.human.count > 0) {
            FrameRender fr = render_composite(model, frame, RenderMode::human_only_white);

            // mask prior (never a pose-gradient source)
            {
                ImageGrad dpix;
                dpix.resize(fr.image.pixels());
                report.mask = mask_mse(mask, fr.image, &dpix, weights.mask);
                GradSinkMask sink = GradSinkMask::none();
                sink.human_gaussians = gate.human_gaussians;
                sink.net = gate.net;
                if (stage == Stage::joint) {
                    sink.camera = gate.camera;
                    sink.theta = gate.theta;
                    sink.beta = gate.beta;
                }
                run_path("mask_prior", fr, dpix, sink);
            }

            // human photometric + silhouette loss drives the body parameters
            if (stage != Stage::warmup) {
                ImageGrad dpix;
                dpix.resize(fr.image.pixels());
                report.human = human_loss(gt, fr.image, mask, &dpix, weights.human);
                GradSinkMask sink = GradSinkMask::none();
                sink.human_gaussians = gate.human_gaussians;
                sink.theta = gate.theta;
                sink.beta = gate.beta;
                sink.net = gate.net;
                if (!gate.camera_from_bg_only) sink.camera = gate.camera;
                run_path("human_loss", fr, dpix, sink);
            }
        }

        // ---- background-only render: camera anchoring path ----
        if (stage != Stage::warmup && model.background.count > 0) {
            FrameRender fr = render_composite(model, frame, RenderMode::background_only);
            ImageGrad dpix;
            dpix.resize(fr.image.pixels());
            report.bg = background_loss(gt, fr.image, mask, &dpix, weights.bg);
            // only background splats exist on this path, so the other
            // families have structurally zero gradients
            GradSinkMask sink = GradSinkMask::none();
            sink.bg_gaussians = gate.bg_gaussians;
            sink.camera = gate.camera;
            run_path("background_loss", fr, dpix, sink);
        }

        // ---- parameter-space regularizers ----
        if (model.human.count > 0) {
            path_grads.clear();
            report.lbs = lbs_regularizer(model.human,
                                         gate.human_gaussians ? &path_grads.human.lbs : nullptr,
                                         weights.lbs);
            report.canonical = canonical_regularizer(
                model.human, surface_tree,
                gate.human_gaussians ? &path_grads.human.mu : nullptr, weights.smpl);
            if (gate.human_gaussians) {
                path_grads.mark(ParamGroup::human_lbs);
                path_grads.mark(ParamGroup::human_position);
            }
            if (hooks.path_observer)
                hooks.path_observer(iter, stage, "regularizers", path_grads, GradSinkMask::none());
            total_grads.accumulate(path_grads);
        }

        report.total = report.weighted_sum(weights);
        if (!std::isfinite(report.total)) {
            model = snapshot;
            adam.states = snapshot_adam;
            result.aborted = true;
            result.abort_reason = "non-finite loss at iteration " + std::to_string(iter) +
                                  "; restored checkpoint from iteration " +
                                  std::to_string(snapshot_iter);
            break;
        }

        // ---- parameter updates ----
        bool step_failed = false;
        try {
            for (ParamGroup g : kAllParamGroups) {
                if (!total_grads.is_touched(g)) continue;
                const int lane = lane_count(model, g) > 1 ? frame : 0;
                auto params = param_lane(model, g, lane);
                auto grads = total_grads.lane(g, lane);
                if (params.empty()) continue;
                adam_step(adam.states[static_cast<int>(g)][lane], params,
                          {grads.data(), grads.size()}, lr_at(schedule, g, iter), AdamConfig{},
                          param_group_name(g));
            }
        } catch (const std::runtime_error& err) {
            model = snapshot;
            adam.states = snapshot_adam;
            result.aborted = true;
            result.abort_reason = std::string(err.what()) + " at iteration " +
                                  std::to_string(iter) + "; restored checkpoint from iteration " +
                                  std::to_string(snapshot_iter);
            step_failed = true;
        }
        if (step_failed) break;

        LogRecord rec;
        rec.iter = iter;
        rec.stage = stage;
        rec.losses = report;
        if (config.psnr_interval > 0 && iter % config.psnr_interval == 0)
            rec.psnr = heldout_psnr(bundle, model, heldout);
        result.log.push_back(rec);

        if (config.checkpoint_interval > 0 && (iter + 1) % config.checkpoint_interval == 0) {
            snapshot = model;
            snapshot_adam = adam.states;
            snapshot_iter = iter + 1;
        }
        result.iterations = iter + 1;
    }

    result.adam = std::move(adam.states);
    return result;
}

}  // namespace jgs
