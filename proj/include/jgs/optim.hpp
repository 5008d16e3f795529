#pragma once

#include <functional>
#include <string>
#include <vector>

#include "jgs/harness.hpp"
#include "jgs/objectives.hpp"
#include "jgs/scene_model.hpp"

namespace jgs {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m, v;
    int64_t step = 0;

    void init(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

// Standard bias-corrected Adam update in place. Throws (naming the group) on
// non-finite gradients.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr, const AdamConfig& config = {}, const char* group_name = "params");

enum class Stage { warmup, independent, joint };
const char* stage_name(Stage s);

struct StageSchedule {
    int64_t warmup_iters = 5000;
    int64_t independent_iters = 5000;
    int64_t joint_iters = 5000;
    std::array<double, kNumParamGroups> base_lr{};

    int64_t total() const { return warmup_iters + independent_iters + joint_iters; }
    double base_lr_of(ParamGroup g) const { return base_lr[static_cast<int>(g)]; }

    static StageSchedule from_config(const RunConfig& config);
};

// Stage lookup; iterations outside the schedule are an error.
Stage stage_of(const StageSchedule& schedule, int64_t iter);

// Base rate through warm-up and independent optimization; cosine decay to
// 0.1x across the joint stage (exactly 0.1x at the closed endpoint).
double lr_at(const StageSchedule& schedule, ParamGroup group, int64_t iter);

// Which parameter families may receive gradients in a stage, and whether the
// camera/body paths are restricted to their own photometric losses.
struct GatingConfig {
    bool human_gaussians = false;
    bool bg_gaussians = false;
    bool camera = false;
    bool theta = false;
    bool beta = false;
    bool net = false;
    bool camera_from_bg_only = false;   // Eq-style routing during stage 2
    bool theta_from_human_only = false;
};

GatingConfig gating_for(Stage stage, bool disable_dynamics, bool disable_synergistic);

struct LogRecord {
    int64_t iter = 0;
    Stage stage = Stage::warmup;
    LossReport losses;
    double psnr = std::numeric_limits<double>::quiet_NaN();  // held-out, every psnr_interval
};

std::string metrics_log_header();
std::string format_log_record(const LogRecord& r);

struct TrainHooks {
    // Called after each loss path's backward with that path's own gradient
    // buffer (before merging); used by the gating instrumentation.
    std::function<void(int64_t iter, Stage stage, const std::string& path,
                       const ModelGrads& path_grads, const GradSinkMask& mask)>
        path_observer;
    PerceptualPlugin perceptual;
};

struct TrainResult {
    SceneModel model;
    std::vector<std::vector<AdamState>> adam;  // [group][lane]
    std::vector<LogRecord> log;
    int64_t iterations = 0;
    bool aborted = false;
    std::string abort_reason;
};

// Three-stage training on the bundle's train split. Deterministic for a
// given bundle and config.
TrainResult train(const SceneBundle& bundle, const RunConfig& config,
                  const TrainHooks& hooks = {}, int64_t max_iters = -1);

void write_metrics_log(const std::string& path, const std::vector<LogRecord>& log);

}  // namespace jgs
