#pragma once

#include <functional>
#include <vector>

#include "jgs/knn.hpp"
#include "jgs/renderer.hpp"
#include "jgs/scene_model.hpp"

namespace jgs {

struct LossWeights {
    double rgb = 1.0;
    double ssim = 0.4;
    double lpips = 0.2;   // inactive unless a perceptual plugin is registered
    double mask = 0.01;
    double lbs = 20.0;
    double smpl = 0.005;  // canonical anchoring
    double dyn = 0.01;
    double bg = 1.0;      // background photometric path
    double human = 1.0;   // human photometric + silhouette path

    void validate() const;
};

// Raw (unweighted) term values; total is the weighted sum.
struct LossReport {
    double l1 = 0.0;         // |I - I_hat|, mean
    double ssim = 0.0;       // 1 - SSIM
    double lpips = 0.0;
    double mask = 0.0;       // MSE(alpha_human, M)
    double lbs = 0.0;
    double canonical = 0.0;
    double dyn = 0.0;
    double bg = 0.0;         // masked background photometric
    double human = 0.0;      // masked human photometric + silhouette
    double total = 0.0;

    double weighted_sum(const LossWeights& w) const;
};

// Perceptual-loss plugin: returns the loss value and, if grad_pred is given,
// accumulates d(loss)/d(pred rgb). No default implementation ships; the term
// is skipped when absent.
using PerceptualPlugin =
    std::function<double(const ImageBuffer& gt, const ImageBuffer& pred, ImageGrad* grad_pred)>;

// Mean L1 over pixels and channels; accumulates weight * d/dpred.
double l1_loss(const ImageBuffer& gt, const ImageBuffer& pred, ImageGrad* grad_pred,
               double weight);

// Mean over pixels and channels of m . |gt - pred| with m = mask or 1-mask.
double masked_l1(const ImageBuffer& gt, const ImageBuffer& pred, const std::vector<double>& mask,
                 bool invert_mask, ImageGrad* grad_pred, double weight);

// Mean |mask - alpha| over pixels (silhouette term).
double silhouette_l1(const std::vector<double>& mask, const ImageBuffer& pred,
                     ImageGrad* grad_pred, double weight);

// Mean (alpha - mask)^2 over pixels (segmentation prior).
double mask_mse(const std::vector<double>& mask, const ImageBuffer& pred, ImageGrad* grad_pred,
                double weight);

// SSIM with an 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2,
// dynamic range 1, clamp-to-edge padding. Returns the mean SSIM over pixels
// and channels; accumulates grad_weight * d(SSIM)/d(pred) when asked.
double ssim_index(const ImageBuffer& a, const ImageBuffer& b, ImageGrad* grad_b = nullptr,
                  double grad_weight = 0.0);

// lambda_rgb * L1 + lambda_ssim * (1 - SSIM) + lambda_lpips * plugin.
// Fills report.l1 / .ssim / .lpips with the raw terms.
void render_loss(const ImageBuffer& gt, const ImageBuffer& pred, const LossWeights& weights,
                 const PerceptualPlugin& plugin, ImageGrad* grad_pred, LossReport& report);

// Photometric error restricted to static regions: mean (1-M).|I - I_B|.
double background_loss(const ImageBuffer& gt, const ImageBuffer& pred_bg,
                       const std::vector<double>& mask, ImageGrad* grad_pred, double weight);

// Masked human photometric plus silhouette supervision.
double human_loss(const ImageBuffer& gt, const ImageBuffer& pred_human,
                  const std::vector<double>& mask, ImageGrad* grad_pred, double weight);

// sum_i ||softmax(logits_i) - w_init_i||^2, gradient to the logits.
double lbs_regularizer(const GaussianSet& human, std::vector<double>* grad_lbs_logit,
                       double weight);

// sum_i min_j ||mu_i - v_j||^2 with exact nearest neighbors.
double canonical_regularizer(const GaussianSet& human, const KdTree3& surface,
                             std::vector<double>* grad_mu, double weight);

// sum_i ||dmu||^2 + ||dR - I||_F^2 + ||dc||^2 over the frame's batch,
// gradients routed through the temporal network.
double dynamics_regularizer(const SceneModel& model, const FrameRender& fr, double weight,
                            const GradSinkMask& mask, ModelGrads* grads);

}  // namespace jgs
