// jgs: synthetic benchmark for joint optimization of cameras, articulated
// bodies, and Gaussian splat fields.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "jgs/checkpoint.hpp"
#include "jgs/experiments.hpp"
#include "jgs/gradcheck.hpp"
#include "jgs/image_io.hpp"
#include "jgs/optim.hpp"

namespace fs = std::filesystem;

namespace {

jgs::RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return jgs::RunConfig{};
    return jgs::RunConfig::load(path);
}

int cmd_generate(const std::string& config_path, const std::string& out, int64_t seed_override) {
    jgs::RunConfig cfg = load_config_or_default(config_path);
    if (seed_override >= 0) cfg.seed = seed_override;
    const jgs::SceneBundle bundle = jgs::generate_scene(cfg);
    jgs::save_bundle(bundle, out);
    std::cout << "wrote " << out << " (" << bundle.frames << " frames, "
              << bundle.gt_human.count << " human + " << bundle.gt_background.count
              << " background gaussians)\n";
    return 0;
}

int cmd_train(const std::string& bundle_path, const std::string& config_path,
              const std::string& out_dir, int64_t max_iters, int disable_dynamics,
              int disable_synergistic) {
    jgs::SceneBundle bundle = jgs::load_bundle(bundle_path);
    jgs::RunConfig cfg = config_path.empty() ? bundle.config : jgs::RunConfig::load(config_path);
    if (disable_dynamics >= 0) cfg.disable_dynamics = disable_dynamics != 0;
    if (disable_synergistic >= 0) cfg.disable_synergistic = disable_synergistic != 0;

    fs::create_directories(out_dir);
    jgs::TrainResult result = jgs::train(bundle, cfg, {}, max_iters);

    jgs::Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.model = std::move(result.model);
    ckpt.adam = std::move(result.adam);
    ckpt.iteration = result.iterations;
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.jgs").string();
    jgs::save_checkpoint(ckpt, ckpt_path);
    jgs::write_metrics_log((fs::path(out_dir) / "metrics.tsv").string(), result.log);

    if (result.aborted) {
        std::cerr << "training aborted: " << result.abort_reason << "\n";
        return 1;
    }
    std::cout << "trained " << result.iterations << " iterations; checkpoint at " << ckpt_path
              << "\n";
    return 0;
}

int cmd_render(const std::string& ckpt_path, int frame, const std::string& mode_name,
               const std::string& pose, const std::string& out) {
    const jgs::Checkpoint ckpt = jgs::load_checkpoint(ckpt_path);
    const jgs::SceneModel& model = ckpt.model;
    if (frame < 0 || frame >= model.frames())
        throw std::runtime_error("render: frame out of range");

    jgs::RenderMode mode = jgs::RenderMode::full;
    if (mode_name == "human") mode = jgs::RenderMode::human_only_white;
    else if (mode_name == "background") mode = jgs::RenderMode::background_only;
    else if (mode_name != "full") throw std::runtime_error("render: unknown mode " + mode_name);

    std::vector<double> theta;
    const double* theta_override = nullptr;
    if (!pose.empty()) {
        const int dim = model.skeleton.theta_dim();
        if (pose == "zeros") {
            theta.assign(dim, 0.0);
        } else {
            std::ifstream f(pose);
            if (!f) throw std::runtime_error("render: cannot open pose file " + pose);
            double v;
            while (f >> v) theta.push_back(v);
            if (static_cast<int>(theta.size()) != dim)
                throw std::runtime_error("render: pose file must hold " + std::to_string(dim) +
                                         " values");
        }
        theta_override = theta.data();
        mode = jgs::RenderMode::human_only_white;  // novel pose implies avatar render
    }

    const jgs::FrameRender fr =
        jgs::render_composite(model, frame, mode, jgs::RenderSettings{}, nullptr, nullptr,
                              theta_override);
    jgs::write_image(fr.image, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& bundle_path,
                 const std::string& params, const std::string& out) {
    const jgs::Checkpoint ckpt = jgs::load_checkpoint(ckpt_path);
    const jgs::SceneBundle bundle = jgs::load_bundle(bundle_path);
    const auto rows = jgs::evaluate_model(bundle, ckpt.model, params == "gt");
    std::string text = "split\tmode\tpsnr\tssim\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%s\t%.9g\t%.9g\n", r.split.c_str(), r.mode.c_str(),
                      r.psnr, r.ssim);
        text += buf;
    }
    if (out.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(out);
        if (!f) throw std::runtime_error("evaluate: cannot write " + out);
        f << text;
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out, const std::string& sigmas,
              const std::string& modes, int seeds) {
    jgs::RunConfig cfg = load_config_or_default(config_path);
    const auto sigma_list = jgs::parse_double_list(sigmas.empty() ? cfg.sigmas : sigmas);
    const auto mode_list = jgs::parse_string_list(modes.empty() ? cfg.sweep_modes : modes);
    const int n_seeds = seeds > 0 ? seeds : cfg.sweep_seeds;
    const auto rows = jgs::robustness_sweep(cfg, sigma_list, mode_list, n_seeds, &std::cerr);
    jgs::write_sweep_tsv(out, rows);
    std::cout << "wrote " << out << " (" << rows.size() << " rows)\n";
    return 0;
}

int cmd_gradcheck(int size, int64_t seed, int samples) {
    std::cout << "gradient audit (image " << size << "x" << size << ", seed " << seed << ")\n";
    const jgs::GradCheckResult result =
        jgs::run_gradcheck(size, static_cast<uint64_t>(seed), samples, &std::cout);
    std::cout << "worst relative error: " << result.worst << "\n";
    if (result.passed(1e-3)) {
        std::cout << "PASS (tolerance 1e-3)\n";
        return 0;
    }
    std::cout << "FAIL (tolerance 1e-3)\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint camera/body/gaussian optimization on synthetic scenes"};
    app.require_subcommand(1);

    std::string config_path, bundle_path, ckpt_path, out_path, pose, mode = "full";
    std::string params = "gt", sigmas, modes;
    int frame = 0, seeds = 0, size = 16, samples = 16;
    int64_t seed = -1, max_iters = -1;
    int disable_dynamics = -1, disable_synergistic = -1;

    auto* generate = app.add_subcommand("generate", "generate a synthetic scene bundle");
    generate->add_option("--config", config_path, "run configuration file");
    generate->add_option("--out", out_path, "output bundle path")->required();
    generate->add_option("--seed", seed, "override the configured seed");

    auto* train = app.add_subcommand("train", "train a model on a scene bundle");
    train->add_option("--bundle", bundle_path, "scene bundle")->required();
    train->add_option("--config", config_path, "replace the embedded run configuration");
    train->add_option("--out-dir", out_path, "output directory")->required();
    train->add_option("--iters", max_iters, "cap the number of iterations");
    train->add_flag("--disable-dynamics{1}", disable_dynamics,
                    "freeze the temporal network at zero");
    train->add_flag("--disable-synergistic{1}", disable_synergistic,
                    "freeze cameras and body parameters at initialization");

    auto* render = app.add_subcommand("render", "render a frame or novel pose from a checkpoint");
    render->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    render->add_option("--frame", frame, "frame index (camera source)");
    render->add_option("--mode", mode, "full | human | background");
    render->add_option("--pose", pose, "novel pose: 'zeros' or a file of theta values");
    render->add_option("--out", out_path, "output image (.png or .ppm)")->required();

    auto* evaluate = app.add_subcommand("evaluate", "PSNR/SSIM tables for a checkpoint");
    evaluate->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    evaluate->add_option("--bundle", bundle_path, "scene bundle")->required();
    evaluate->add_option("--params", params, "gt | refined: parameters used on held-out frames");
    evaluate->add_option("--out", out_path, "output TSV (stdout when omitted)");

    auto* sweep = app.add_subcommand("sweep", "robustness-to-initialization sweep");
    sweep->add_option("--config", config_path, "run configuration file");
    sweep->add_option("--out", out_path, "output TSV")->required();
    sweep->add_option("--sigmas", sigmas, "comma-separated noise levels");
    sweep->add_option("--modes", modes, "comma-separated subset of joint,frozen");
    sweep->add_option("--seeds", seeds, "seeds per cell");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gradcheck->add_option("--size", size, "probe image size");
    gradcheck->add_option("--seed", seed, "probe seed");
    gradcheck->add_option("--samples", samples, "samples per parameter class");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(config_path, out_path, seed);
        if (train->parsed())
            return cmd_train(bundle_path, config_path, out_path, max_iters, disable_dynamics,
                             disable_synergistic);
        if (render->parsed()) return cmd_render(ckpt_path, frame, mode, pose, out_path);
        if (evaluate->parsed()) return cmd_evaluate(ckpt_path, bundle_path, params, out_path);
        if (sweep->parsed()) return cmd_sweep(config_path, out_path, sigmas, modes, seeds);
        if (gradcheck->parsed())
            return cmd_gradcheck(size, seed < 0 ? 7 : seed, samples);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
