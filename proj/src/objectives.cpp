#include "jgs/objectives.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <stdexcept>

namespace jgs {

namespace {

void check_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(std::string(what) + ": image shape mismatch");
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void LossWeights::validate() const {
    const double all[] = {rgb, ssim, lpips, mask, lbs, smpl, dyn, bg, human};
    for (double v : all)
        if (!(v >= 0.0)) throw std::invalid_argument("LossWeights: weights must be >= 0");
}

double LossReport::weighted_sum(const LossWeights& w) const {
    return w.rgb * l1 + w.ssim * ssim + w.lpips * lpips + w.mask * mask + w.lbs * lbs +
           w.smpl * canonical + w.dyn * dyn + w.bg * bg + w.human * human;
}

double l1_loss(const ImageBuffer& gt, const ImageBuffer& pred, ImageGrad* grad_pred,
               double weight) {
    check_same_shape(gt, pred, "l1_loss");
    const std::size_t n = gt.rgb.size();
    const double norm = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = gt.rgb[i] - pred.rgb[i];
        sum += std::abs(d);
        if (grad_pred) grad_pred->rgb[i] += weight * norm * -sign(d);
    }
    return sum * norm;
}

double masked_l1(const ImageBuffer& gt, const ImageBuffer& pred, const std::vector<double>& mask,
                 bool invert_mask, ImageGrad* grad_pred, double weight) {
    check_same_shape(gt, pred, "masked_l1");
    if (mask.size() != gt.alpha.size())
        throw std::invalid_argument("masked_l1: mask size mismatch");
    const std::size_t pixels = mask.size();
    const double norm = 1.0 / static_cast<double>(3 * pixels);
    double sum = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
        const double m = invert_mask ? 1.0 - mask[p] : mask[p];
        if (m == 0.0) continue;
        for (int c = 0; c < 3; ++c) {
            const double d = gt.rgb[3 * p + c] - pred.rgb[3 * p + c];
            sum += m * std::abs(d);
            if (grad_pred) grad_pred->rgb[3 * p + c] += weight * norm * m * -sign(d);
        }
    }
    return sum * norm;
}

double silhouette_l1(const std::vector<double>& mask, const ImageBuffer& pred,
                     ImageGrad* grad_pred, double weight) {
    if (mask.size() != pred.alpha.size())
        throw std::invalid_argument("silhouette_l1: mask size mismatch");
    const double norm = 1.0 / static_cast<double>(mask.size());
    double sum = 0.0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        const double d = mask[p] - pred.alpha[p];
        sum += std::abs(d);
        if (grad_pred) grad_pred->alpha[p] += weight * norm * -sign(d);
    }
    return sum * norm;
}

double mask_mse(const std::vector<double>& mask, const ImageBuffer& pred, ImageGrad* grad_pred,
                double weight) {
    if (mask.size() != pred.alpha.size())
        throw std::invalid_argument("mask_mse: mask size mismatch");
    const double norm = 1.0 / static_cast<double>(mask.size());
    double sum = 0.0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        const double d = pred.alpha[p] - mask[p];
        sum += d * d;
        if (grad_pred) grad_pred->alpha[p] += weight * norm * 2.0 * d;
    }
    return sum * norm;
}

// ---------------------------------------------------------------------------
// SSIM

namespace {

constexpr int kWin = 11;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

const std::array<double, kWin>& ssim_kernel() {
    static const std::array<double, kWin> k = [] {
        std::array<double, kWin> v{};
        const double sigma = 1.5;
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            v[i] = std::exp(-d * d / (2.0 * sigma * sigma));
            sum += v[i];
        }
        for (auto& x : v) x /= sum;
        return v;
    }();
    return k;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Separable Gaussian filter with clamp-to-edge indexing.
void filter_h(const std::vector<double>& in, std::vector<double>& out, int w, int h) {
    const auto& k = ssim_kernel();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWin; ++i) s += k[i] * in[y * w + clampi(x + i - kWin / 2, 0, w - 1)];
            out[y * w + x] = s;
        }
}

void filter_v(const std::vector<double>& in, std::vector<double>& out, int w, int h) {
    const auto& k = ssim_kernel();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWin; ++i) s += k[i] * in[clampi(y + i - kWin / 2, 0, h - 1) * w + x];
            out[y * w + x] = s;
        }
}

// Transposes of the clamped filters (scatter form).
void filter_h_t(const std::vector<double>& in, std::vector<double>& out, int w, int h) {
    const auto& k = ssim_kernel();
    std::fill(out.begin(), out.end(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double g = in[y * w + x];
            if (g == 0.0) continue;
            for (int i = 0; i < kWin; ++i) out[y * w + clampi(x + i - kWin / 2, 0, w - 1)] += k[i] * g;
        }
}

void filter_v_t(const std::vector<double>& in, std::vector<double>& out, int w, int h) {
    const auto& k = ssim_kernel();
    std::fill(out.begin(), out.end(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double g = in[y * w + x];
            if (g == 0.0) continue;
            for (int i = 0; i < kWin; ++i) out[clampi(y + i - kWin / 2, 0, h - 1) * w + x] += k[i] * g;
        }
}

void gauss(const std::vector<double>& in, std::vector<double>& tmp, std::vector<double>& out,
           int w, int h) {
    filter_h(in, tmp, w, h);
    filter_v(tmp, out, w, h);
}

void gauss_t(const std::vector<double>& in, std::vector<double>& tmp, std::vector<double>& out,
             int w, int h) {
    filter_v_t(in, tmp, w, h);
    filter_h_t(tmp, out, w, h);
}

}  // namespace

double ssim_index(const ImageBuffer& a, const ImageBuffer& b, ImageGrad* grad_b,
                  double grad_weight) {
    check_same_shape(a, b, "ssim_index");
    const int w = a.width, h = a.height;
    const int pixels = w * h;
    std::vector<double> x(pixels), y(pixels), tmp(pixels);
    std::vector<double> mux(pixels), muy(pixels), sxx(pixels), syy(pixels), sxy(pixels);
    std::vector<double> m1(pixels), m2(pixels), m3(pixels), t1(pixels), t2(pixels), t3(pixels);

    double total = 0.0;
    const double pixel_norm = 1.0 / static_cast<double>(3 * pixels);
    for (int c = 0; c < 3; ++c) {
        for (int p = 0; p < pixels; ++p) {
            x[p] = a.rgb[3 * p + c];
            y[p] = b.rgb[3 * p + c];
        }
        gauss(x, tmp, mux, w, h);
        gauss(y, tmp, muy, w, h);
        for (int p = 0; p < pixels; ++p) t1[p] = x[p] * x[p];
        gauss(t1, tmp, sxx, w, h);
        for (int p = 0; p < pixels; ++p) t1[p] = y[p] * y[p];
        gauss(t1, tmp, syy, w, h);
        for (int p = 0; p < pixels; ++p) t1[p] = x[p] * y[p];
        gauss(t1, tmp, sxy, w, h);

        for (int p = 0; p < pixels; ++p) {
            const double vx = sxx[p] - mux[p] * mux[p];
            const double vy = syy[p] - muy[p] * muy[p];
            const double cov = sxy[p] - mux[p] * muy[p];
            const double a1 = 2.0 * mux[p] * muy[p] + kSsimC1;
            const double a2 = 2.0 * cov + kSsimC2;
            const double b1 = mux[p] * mux[p] + muy[p] * muy[p] + kSsimC1;
            const double b2 = vx + vy + kSsimC2;
            const double d = b1 * b2;
            const double s = a1 * a2 / d;
            total += s * pixel_norm;

            if (grad_b) {
                const double u = grad_weight * pixel_norm;
                const double ds_dmuy = 2.0 * mux[p] * a2 / d - 2.0 * s * muy[p] / b1;
                const double ds_dcov = 2.0 * a1 / d;
                const double ds_dvy = -s / b2;
                m1[p] = u * (ds_dmuy - ds_dcov * mux[p] - 2.0 * ds_dvy * muy[p]);
                m2[p] = u * ds_dcov;
                m3[p] = u * 2.0 * ds_dvy;
            }
        }

        if (grad_b) {
            gauss_t(m1, tmp, t1, w, h);
            gauss_t(m2, tmp, t2, w, h);
            gauss_t(m3, tmp, t3, w, h);
            for (int p = 0; p < pixels; ++p)
                grad_b->rgb[3 * p + c] += t1[p] + x[p] * t2[p] + y[p] * t3[p];
        }
    }
    return total;
}

void render_loss(const ImageBuffer& gt, const ImageBuffer& pred, const LossWeights& weights,
                 const PerceptualPlugin& plugin, ImageGrad* grad_pred, LossReport& report) {
    weights.validate();
    report.l1 = l1_loss(gt, pred, grad_pred, weights.rgb);
    report.ssim = 1.0 - ssim_index(gt, pred, grad_pred, -weights.ssim);
    if (plugin) {
        if (grad_pred) {
            ImageGrad scratch;
            scratch.resize(gt.pixels());
            report.lpips = plugin(gt, pred, &scratch);
            for (std::size_t i = 0; i < scratch.rgb.size(); ++i)
                grad_pred->rgb[i] += weights.lpips * scratch.rgb[i];
        } else {
            report.lpips = plugin(gt, pred, nullptr);
        }
    } else if (weights.lpips > 0.0) {
        static std::once_flag warned;
        std::call_once(warned, [] {
            std::fprintf(stderr,
                         "[objectives] perceptual weight is set but no plugin is registered; "
                         "term skipped\n");
        });
        report.lpips = 0.0;
    }
}

double background_loss(const ImageBuffer& gt, const ImageBuffer& pred_bg,
                       const std::vector<double>& mask, ImageGrad* grad_pred, double weight) {
    return masked_l1(gt, pred_bg, mask, /*invert_mask=*/true, grad_pred, weight);
}

double human_loss(const ImageBuffer& gt, const ImageBuffer& pred_human,
                  const std::vector<double>& mask, ImageGrad* grad_pred, double weight) {
    const double photo = masked_l1(gt, pred_human, mask, /*invert_mask=*/false, grad_pred, weight);
    const double sil = silhouette_l1(mask, pred_human, grad_pred, weight);
    return photo + sil;
}

double lbs_regularizer(const GaussianSet& human, std::vector<double>* grad_lbs_logit,
                       double weight) {
    const int k = human.num_joints;
    if (k == 0 || human.count == 0) return 0.0;
    std::vector<double> w(k), dw(k);
    double sum = 0.0;
    for (int i = 0; i < human.count; ++i) {
        human.lbs_weights(i, w.data());
        const double* init = &human.lbs_init[static_cast<std::size_t>(i) * k];
        double dot = 0.0;
        for (int j = 0; j < k; ++j) {
            const double d = w[j] - init[j];
            sum += d * d;
            dw[j] = 2.0 * d;
            dot += dw[j] * w[j];
        }
        if (grad_lbs_logit)
            for (int j = 0; j < k; ++j)
                (*grad_lbs_logit)[static_cast<std::size_t>(i) * k + j] +=
                    weight * w[j] * (dw[j] - dot);
    }
    return sum;
}

double canonical_regularizer(const GaussianSet& human, const KdTree3& surface,
                             std::vector<double>* grad_mu, double weight) {
    if (human.count == 0 || surface.empty()) return 0.0;
    double sum = 0.0;
    for (int i = 0; i < human.count; ++i) {
        const Eigen::Vector3d mu = human.mu_at(i);
        double d2 = 0.0;
        const int j = surface.nearest(mu, &d2);
        sum += d2;
        if (grad_mu) {
            const Eigen::Vector3d g = 2.0 * (mu - surface.point(j));
            for (int a = 0; a < 3; ++a) (*grad_mu)[3 * i + a] += weight * g[a];
        }
    }
    return sum;
}

double dynamics_regularizer(const SceneModel& model, const FrameRender& fr, double weight,
                            const GradSinkMask& mask, ModelGrads* grads) {
    if (!fr.dynamics_used || fr.n_human == 0) return 0.0;
    NetGrads sinks;
    const bool deposit_net = grads != nullptr && mask.net;
    const bool deposit_mu = grads != nullptr && mask.human_gaussians;
    const bool deposit = deposit_net || deposit_mu;
    if (deposit_net) {
        sinks.offset_weights = &grads->net_offset;
        sinks.color_weights = &grads->net_color;
        sinks.hash_table = &grads->net_hash;
    }
    double sum = 0.0;
    for (int i = 0; i < fr.n_human; ++i) {
        const NetOutputs& out = fr.net_cache.outputs[i];
        const Eigen::Matrix3d r_minus_i = fr.delta_rot[i] - Eigen::Matrix3d::Identity();
        sum += out.delta_mu.squaredNorm() + r_minus_i.squaredNorm() +
               out.delta_color.squaredNorm();
        if (deposit) {
            const Eigen::Vector3d d_mu = weight * 2.0 * out.delta_mu;
            const Eigen::Vector3d d_aa =
                weight * so3_exp_backward(out.delta_rot_aa, 2.0 * r_minus_i);
            const Eigen::Vector3d d_c = weight * 2.0 * out.delta_color;
            Eigen::Vector3d d_mu_c = Eigen::Vector3d::Zero();
            net_backward(model.net, fr.net_cache, i, d_mu, d_aa, d_c, sinks,
                         deposit_mu ? &d_mu_c : nullptr);
            if (deposit_mu)
                for (int a = 0; a < 3; ++a) grads->human.mu[3 * i + a] += d_mu_c[a];
        }
    }
    if (deposit_net) {
        grads->mark(ParamGroup::net_offset);
        grads->mark(ParamGroup::net_color);
        grads->mark(ParamGroup::net_hash);
    }
    if (deposit_mu) grads->mark(ParamGroup::human_position);
    return sum;
}

}  // namespace jgs
