#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "jgs/experiments.hpp"
#include "jgs/optim.hpp"
#include "jgs/rng.hpp"

using namespace jgs;

namespace {

RunConfig smoke_config(int64_t seed) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.frames = 4;
    cfg.image_width = 20;
    cfg.image_height = 20;
    cfg.n_human = 30;
    cfg.n_background = 50;
    cfg.n_surface_vertices = 100;
    cfg.hash_levels = 2;
    cfg.hash_table_size = 128;
    cfg.hash_base_resolution = 4.0;
    cfg.mlp_hidden = 8;
    cfg.iters_warmup = 6;
    cfg.iters_independent = 6;
    cfg.iters_joint = 6;
    cfg.checkpoint_interval = 5;
    cfg.psnr_interval = 6;
    cfg.motion_amplitude = 0.15;
    return cfg;
}

}  // namespace

TEST_CASE("adam closed-form behavior") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        AdamState state;
        state.init(3);
        std::vector<double> p{1.0, -2.0, 0.5};
        const std::vector<double> before = p;
        std::vector<double> g(3, 0.0);
        adam_step(state, p, g, 1e-3);
        CHECK(p == before);
    }
    SUBCASE("first step moves by approximately the learning rate") {
        AdamState state;
        state.init(1);
        std::vector<double> p{2.0};
        std::vector<double> g{1.0};
        adam_step(state, p, g, 1e-3);
        // bias-corrected first step: lr / (1 + eps)
        CHECK(std::abs(p[0] - (2.0 - 1e-3 / (1.0 + 1e-8))) < 1e-9);
        CHECK(std::abs(p[0] - (2.0 - 1e-3)) < 1e-9);
    }
    SUBCASE("updates are deterministic") {
        AdamState s1, s2;
        s1.init(4);
        s2.init(4);
        std::vector<double> p1{1, 2, 3, 4}, p2{1, 2, 3, 4};
        Rng rng(91);
        for (int i = 0; i < 50; ++i) {
            std::vector<double> g(4);
            for (auto& v : g) v = rng.normal();
            adam_step(s1, p1, g, 1e-2);
            adam_step(s2, p2, g, 1e-2);
        }
        CHECK(p1 == p2);
        CHECK(s1.m == s2.m);
        CHECK(s1.v == s2.v);
    }
    SUBCASE("non-finite gradients name the parameter group") {
        AdamState state;
        state.init(1);
        std::vector<double> p{0.0};
        std::vector<double> g{std::numeric_limits<double>::quiet_NaN()};
        try {
            adam_step(state, p, g, 1e-3, {}, "theta");
            CHECK(false);
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("theta") != std::string::npos);
        }
    }
}

TEST_CASE("stage boundaries and learning-rate schedule") {
    StageSchedule s;
    s.warmup_iters = 5000;
    s.independent_iters = 5000;
    s.joint_iters = 10000;
    s.base_lr.fill(0.0);
    s.base_lr[static_cast<int>(ParamGroup::camera)] = 0.001;

    CHECK(stage_of(s, 0) == Stage::warmup);
    CHECK(stage_of(s, 4999) == Stage::warmup);
    CHECK(stage_of(s, 5000) == Stage::independent);
    CHECK(stage_of(s, 9999) == Stage::independent);
    CHECK(stage_of(s, 10000) == Stage::joint);
    CHECK(stage_of(s, 19999) == Stage::joint);
    CHECK_THROWS(stage_of(s, 20000));
    CHECK_THROWS(stage_of(s, -1));

    const ParamGroup g = ParamGroup::camera;
    CHECK(lr_at(s, g, 0) == 0.001);
    CHECK(lr_at(s, g, 9999) == 0.001);
    CHECK(lr_at(s, g, 10000) == 0.001);                    // cosine start: base
    CHECK(lr_at(s, g, 20000) == 0.1 * 0.001);              // endpoint exactly 0.1x
    CHECK(lr_at(s, g, 15000) == doctest::Approx(0.55 * 0.001).epsilon(1e-12));
}

TEST_CASE("gating configuration per stage") {
    SUBCASE("warm-up optimizes only gaussians") {
        const GatingConfig g = gating_for(Stage::warmup, false, false);
        CHECK(g.human_gaussians);
        CHECK(g.bg_gaussians);
        CHECK_FALSE(g.camera);
        CHECK_FALSE(g.theta);
        CHECK_FALSE(g.beta);
        CHECK_FALSE(g.net);
    }
    SUBCASE("independent stage routes camera and body to their own paths") {
        const GatingConfig g = gating_for(Stage::independent, false, false);
        CHECK(g.camera);
        CHECK(g.theta);
        CHECK(g.camera_from_bg_only);
        CHECK(g.theta_from_human_only);
        CHECK_FALSE(g.beta);
    }
    SUBCASE("joint stage enables everything") {
        const GatingConfig g = gating_for(Stage::joint, false, false);
        CHECK(g.camera);
        CHECK(g.theta);
        CHECK(g.beta);
        CHECK(g.net);
        CHECK_FALSE(g.camera_from_bg_only);
    }
    SUBCASE("ablations freeze their parameter families in every stage") {
        const GatingConfig g = gating_for(Stage::joint, true, true);
        CHECK_FALSE(g.net);
        CHECK_FALSE(g.camera);
        CHECK_FALSE(g.theta);
        CHECK_FALSE(g.beta);
    }
}

TEST_CASE("zero-iteration training returns the initial state") {
    const RunConfig cfg = smoke_config(301);
    const SceneBundle bundle = generate_scene(cfg);
    const SceneModel init = initial_model(bundle);
    const TrainResult result = train(bundle, cfg, {}, 0);
    CHECK(result.iterations == 0);
    CHECK(result.model.human.mu == init.human.mu);
    CHECK(result.model.background.sh == init.background.sh);
    CHECK(result.model.cameras[0].correction == init.cameras[0].correction);
}

TEST_CASE("seeded training runs are bit-reproducible") {
    const RunConfig cfg = smoke_config(302);
    const SceneBundle bundle = generate_scene(cfg);
    const TrainResult a = train(bundle, cfg);
    const TrainResult b = train(bundle, cfg);
    CHECK(a.model.human.mu == b.model.human.mu);
    CHECK(a.model.human.sh == b.model.human.sh);
    CHECK(a.model.background.opacity_logit == b.model.background.opacity_logit);
    CHECK(a.model.beta == b.model.beta);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i)
        CHECK(format_log_record(a.log[i]) == format_log_record(b.log[i]));
}

TEST_CASE("stage gating holds at the gradient-buffer level during training") {
    RunConfig cfg = smoke_config(303);
    cfg.noise_sigma = 0.005;
    const SceneBundle bundle = generate_scene(cfg);

    bool saw_warmup = false, saw_independent = false, saw_joint = false;
    bool violation = false;
    std::string violation_what;

    TrainHooks hooks;
    hooks.path_observer = [&](int64_t, Stage stage, const std::string& path,
                              const ModelGrads& grads, const GradSinkMask&) {
        const bool camera_touched = grads.is_touched(ParamGroup::camera) ||
                                    grads.max_abs(ParamGroup::camera) > 0.0;
        const bool theta_touched = grads.is_touched(ParamGroup::theta) ||
                                   grads.max_abs(ParamGroup::theta) > 0.0;
        if (stage == Stage::warmup) {
            saw_warmup = true;
            if (camera_touched || theta_touched) {
                violation = true;
                violation_what = "warmup touched camera or theta via " + path;
            }
        } else if (stage == Stage::independent) {
            saw_independent = true;
            // the camera buffer may only receive background-path deposits,
            // the body pose buffer only human-path deposits
            if (camera_touched && path != "background_loss") {
                violation = true;
                violation_what = "camera gradient from " + path;
            }
            if (theta_touched && path != "human_loss") {
                violation = true;
                violation_what = "theta gradient from " + path;
            }
        } else {
            saw_joint = true;
        }
    };
    train(bundle, cfg, hooks);
    CHECK(saw_warmup);
    CHECK(saw_independent);
    CHECK(saw_joint);
    INFO(violation_what);
    CHECK_FALSE(violation);
}

TEST_CASE("training reduces the fit loss on a single frame with everything frozen but gaussians") {
    RunConfig cfg = smoke_config(304);
    cfg.frames = 1;
    cfg.disable_dynamics = true;
    cfg.disable_synergistic = true;
    cfg.iters_warmup = 40;
    cfg.iters_independent = 0;
    cfg.iters_joint = 0;
    const SceneBundle bundle = generate_scene(cfg);
    const TrainResult result = train(bundle, cfg);
    REQUIRE(result.log.size() == 40);
    const double first = result.log.front().losses.total;
    const double last = result.log.back().losses.total;
    CHECK(last < first);
}

TEST_CASE("training loss trends downward across iteration windows") {
    RunConfig cfg = smoke_config(305);
    cfg.frames = 3;
    cfg.iters_warmup = 420;
    cfg.iters_independent = 0;
    cfg.iters_joint = 0;
    cfg.noise_sigma = 0.0;
    const SceneBundle bundle = generate_scene(cfg);
    const TrainResult result = train(bundle, cfg);
    REQUIRE(result.log.size() == 420);

    // soft regression: windowed mean loss should not increase along the run
    auto window_mean = [&](int start) {
        double sum = 0.0;
        for (int i = start; i < start + 60; ++i) sum += result.log[i].losses.total;
        return sum / 60.0;
    };
    int ok = 0, total = 0;
    for (int s = 0; s + 360 + 60 <= 420; s += 30) {
        ++total;
        if (window_mean(s + 360) <= window_mean(s) * 1.02) ++ok;
    }
    CHECK(ok >= (9 * total) / 10);
    CHECK(window_mean(360) < window_mean(0));
}

TEST_CASE("frozen training from clean init beats frozen training from corrupted init") {
    RunConfig cfg = smoke_config(306);
    cfg.frames = 1;
    cfg.image_width = cfg.image_height = 24;
    cfg.n_human = 60;
    cfg.n_background = 120;
    cfg.disable_synergistic = true;
    cfg.disable_dynamics = true;
    cfg.iters_warmup = 150;
    cfg.iters_independent = 0;
    cfg.iters_joint = 0;

    auto final_psnr = [&](double sigma) {
        RunConfig c = cfg;
        c.noise_sigma = sigma;
        const SceneBundle bundle = generate_scene(c);
        const TrainResult tr = train(bundle, c);
        double p = 0.0, s = 0.0;
        human_metrics(bundle, tr.model, {0}, /*use_gt_params=*/true, p, s);
        return p;
    };
    CHECK(final_psnr(0.0) >= final_psnr(0.02));
}

TEST_CASE("a tiny robustness sweep emits the documented, sorted table") {
    RunConfig cfg = smoke_config(307);
    cfg.frames = 3;
    cfg.iters_warmup = 4;
    cfg.iters_independent = 4;
    cfg.iters_joint = 4;
    const auto rows = robustness_sweep(cfg, {0.01, 0.0}, {"joint", "frozen"}, 1, nullptr);
    REQUIRE(rows.size() == 4);
    // sorted by (sigma, mode, seed) regardless of request order
    CHECK(rows[0].sigma == 0.0);
    CHECK(rows[0].mode == "frozen");
    CHECK(rows[1].mode == "joint");
    CHECK(rows[2].sigma == 0.01);

    const std::string tsv = sweep_tsv(rows);
    std::istringstream is(tsv);
    std::string header;
    std::getline(is, header);
    CHECK(header == "sigma\tmode\tseed\tpsnr\tssim");
    int parsed = 0;
    double sig, ps, ss;
    std::string mode;
    uint64_t seed;
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        ls >> sig >> mode >> seed >> ps >> ss;
        CHECK_FALSE(ls.fail());
        ++parsed;
    }
    CHECK(parsed == 4);
}

TEST_CASE("metrics log format is documented and stable") {
    CHECK(metrics_log_header() ==
          "iter\tstage\tl1\tssim\tlpips\tmask\tlbs\tcanonical\tdyn\tbg\thuman\ttotal\tpsnr");
    LogRecord r;
    r.iter = 12;
    r.stage = Stage::independent;
    r.losses.l1 = 0.25;
    r.losses.total = 0.5;
    const std::string line = format_log_record(r);
    CHECK(line.find("12\tindependent\t0.25") == 0);
}
