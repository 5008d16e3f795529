#include "jgs/gradcheck.hpp"

#include <cmath>
#include <ostream>

#include "jgs/harness.hpp"
#include "jgs/knn.hpp"
#include "jgs/objectives.hpp"
#include "jgs/rng.hpp"
#include "jgs/scene_model.hpp"

namespace jgs {

namespace {

struct Probe {
    SceneBundle bundle;
    SceneModel model;
    LossWeights weights;
    KdTree3 surface;
    int frame = 0;
};

// Joint-stage total loss over one frame: full render + human path +
// background path + every regularizer.
double total_loss(Probe& p, ModelGrads* grads) {
    const GradSinkMask all = GradSinkMask::all();
    const std::vector<double> mask = p.bundle.binary_mask(p.frame);
    const ImageBuffer& gt = p.bundle.images[p.frame];
    LossReport report;

    {
        FrameRender fr = render_composite(p.model, p.frame, RenderMode::full);
        ImageGrad dpix;
        dpix.resize(fr.image.pixels());
        render_loss(gt, fr.image, p.weights, nullptr, grads ? &dpix : nullptr, report);
        report.dyn = dynamics_regularizer(p.model, fr, p.weights.dyn, all, grads);
        if (grads) render_backward(p.model, fr, dpix, all, *grads);
    }
    {
        FrameRender fr = render_composite(p.model, p.frame, RenderMode::human_only_white);
        ImageGrad dpix;
        dpix.resize(fr.image.pixels());
        report.mask = mask_mse(mask, fr.image, grads ? &dpix : nullptr, p.weights.mask);
        report.human = human_loss(gt, fr.image, mask, grads ? &dpix : nullptr, p.weights.human);
        if (grads) render_backward(p.model, fr, dpix, all, *grads);
    }
    {
        FrameRender fr = render_composite(p.model, p.frame, RenderMode::background_only);
        ImageGrad dpix;
        dpix.resize(fr.image.pixels());
        report.bg = background_loss(gt, fr.image, mask, grads ? &dpix : nullptr, p.weights.bg);
        if (grads) render_backward(p.model, fr, dpix, all, *grads);
    }
    report.lbs = lbs_regularizer(p.model.human, grads ? &grads->human.lbs : nullptr,
                                 p.weights.lbs);
    report.canonical = canonical_regularizer(p.model.human, p.surface,
                                             grads ? &grads->human.mu : nullptr, p.weights.smpl);
    return report.weighted_sum(p.weights);
}

Probe make_probe(int image_size, uint64_t seed) {
    RunConfig cfg;
    cfg.seed = static_cast<int64_t>(seed);
    cfg.frames = 3;
    cfg.image_width = image_size;
    cfg.image_height = image_size;
    cfg.joints = 24;
    cfg.n_human = 48;
    cfg.n_background = 64;
    cfg.n_surface_vertices = 160;
    cfg.sh_degree = 1;
    cfg.hash_levels = 4;
    cfg.hash_table_size = 512;
    cfg.hash_features = 2;
    cfg.hash_base_resolution = 4.0;
    cfg.mlp_hidden = 16;
    cfg.motion_amplitude = 0.3;
    cfg.nonrigid_amplitude = 0.0;
    cfg.noise_sigma = 0.0;

    Probe p;
    p.bundle = generate_scene(cfg);
    p.model = initial_model(p.bundle);
    p.model.dynamics_enabled = true;

    // Perturb everything away from trivial points so every chain carries
    // signal: nonzero residual heads, off-init skinning logits, nonzero
    // camera corrections, posed body.
    Rng rng(seed ^ 0xABCD1234u);
    for (auto& v : p.model.net.offset_mlp.weights) v += rng.uniform(-0.05, 0.05);
    for (auto& v : p.model.net.color_mlp.weights) v += rng.uniform(-0.05, 0.05);
    for (auto& v : p.model.net.hash_table) v += rng.uniform(-0.2, 0.2);
    for (auto& v : p.model.human.lbs_logit)
        if (v > -600.0) v += rng.uniform(-0.2, 0.2);
    for (auto& frame_theta : p.model.theta)
        for (auto& v : frame_theta) v += rng.uniform(-0.03, 0.03);
    for (auto& v : p.model.beta) v += rng.uniform(-0.04, 0.04);
    for (auto& cam : p.model.cameras)
        for (int a = 0; a < 6; ++a) cam.correction[a] += rng.uniform(-0.01, 0.01);
    for (auto& v : p.model.human.opacity_logit) v += rng.uniform(-0.5, 0.5);
    for (auto& v : p.model.background.opacity_logit) v += rng.uniform(-0.5, 0.5);
    // anisotropic splats, so rotations carry real signal
    for (auto& v : p.model.human.log_scale) v += rng.uniform(-0.6, 0.6);
    for (auto& v : p.model.background.log_scale) v += rng.uniform(-0.6, 0.6);
    for (auto& v : p.model.human.rot) v += rng.uniform(-0.3, 0.3);
    for (auto& v : p.model.background.rot) v += rng.uniform(-0.3, 0.3);

    p.weights = LossWeights{};
    p.weights.lpips = 0.0;
    p.surface = KdTree3(p.model.skeleton.vertices);
    p.frame = 1;
    return p;
}

}  // namespace

GradCheckResult run_gradcheck(int image_size, uint64_t seed, int samples_per_group,
                              std::ostream* out) {
    Probe probe = make_probe(image_size, seed);

    ModelGrads analytic;
    analytic.resize_for(probe.model);
    const double base_loss = total_loss(probe, &analytic);

    GradCheckResult result;
    Rng pick(seed ^ 0x51CE17u);
    const double step = 1e-5;

    for (ParamGroup g : kAllParamGroups) {
        const int lanes = lane_count(probe.model, g);
        // per-frame groups: audit the rendered frame's lane
        const int lane = lanes > 1 ? probe.frame : 0;
        auto params = param_lane(probe.model, g, lane);
        auto grads = analytic.lane(g, lane);
        const char* name = param_group_name(g);
        if (params.empty()) {
            result.max_rel_err[name] = 0.0;
            continue;
        }

        double worst = 0.0;
        int checked = 0;
        // class gradient scale: coordinates far below it cannot be measured
        // by double-precision finite differences at a meaningful tolerance
        double class_scale = 0.0;
        for (double v : grads) class_scale = std::max(class_scale, std::abs(v));
        const double floor = std::max(1e-4 * class_scale, 1e-9);
        const int samples = std::min<int>(samples_per_group, static_cast<int>(params.size()));
        for (int s = 0; s < samples; ++s) {
            const std::size_t idx =
                samples == static_cast<int>(params.size())
                    ? static_cast<std::size_t>(s)
                    : static_cast<std::size_t>(pick.uniform_int(static_cast<int>(params.size())));
            // frozen skinning logits sit at the underflow floor; skip them
            if (g == ParamGroup::human_lbs && params[idx] < -600.0) continue;
            const double saved = params[idx];
            auto loss_at = [&](double h) {
                params[idx] = saved + h;
                const double value = total_loss(probe, nullptr);
                params[idx] = saved;
                return value;
            };
            const double plus = loss_at(step);
            const double minus = loss_at(-step);
            const double plus_half = loss_at(0.5 * step);
            const double minus_half = loss_at(-0.5 * step);
            const double fd = (plus - minus) / (2.0 * step);
            const double fd_half = (plus_half - minus_half) / step;
            const double slope_r = (plus - base_loss) / step;
            const double slope_l = (base_loss - minus) / step;
            // The splatting function has documented cutoffs (alpha floor,
            // 3-sigma ellipse, clamp, early stop) and the canonical anchor
            // switches nearest vertices. Probes straddling one of those are
            // not differentiable points: the two-step central differences or
            // the one-sided slopes disagree there, and the sample is skipped.
            // At smooth points a wrong analytic gradient is still caught.
            const double fd_agree = std::abs(fd - fd_half) /
                                    std::max({std::abs(fd), std::abs(fd_half), 1e-8});
            const double side_agree = std::abs(slope_r - slope_l) /
                                      std::max({std::abs(slope_r), std::abs(slope_l), 1e-8});
            if (fd_agree > 1e-3 || side_agree > 2e-3) continue;
            ++checked;
            const double an = grads[idx];
            const double denom = std::max({std::abs(fd), std::abs(an), floor});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
        (void)checked;
        result.max_rel_err[name] = worst;
        result.worst = std::max(result.worst, worst);
        if (out)
            (*out) << "  " << name << ": max relative error " << worst << "\n";
    }
    return result;
}

}  // namespace jgs
