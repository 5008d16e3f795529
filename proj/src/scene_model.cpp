#include "jgs/scene_model.hpp"

#include <cmath>
#include <stdexcept>

#include "jgs/rng.hpp"

namespace jgs {

Eigen::Vector3d NonRigidField::eval(const Eigen::Vector3d& mu_c, double t_norm) const {
    if (amplitude == 0.0) return Eigen::Vector3d::Zero();
    Eigen::Vector3d out;
    for (int a = 0; a < 3; ++a) {
        const double arg = 2.0 * M_PI * (spatial_freq * directions.row(a).dot(mu_c) +
                                         temporal_freq * t_norm) + phase[a];
        out[a] = amplitude * std::sin(arg);
    }
    return out;
}

NonRigidField NonRigidField::make(double amplitude, double spatial_freq, double temporal_freq,
                                  uint64_t seed) {
    NonRigidField f;
    f.amplitude = amplitude;
    f.spatial_freq = spatial_freq;
    f.temporal_freq = temporal_freq;
    Rng rng(seed);
    for (int a = 0; a < 3; ++a) {
        f.directions.row(a) = rng.unit_vector().transpose();
        f.phase[a] = rng.uniform(0.0, 2.0 * M_PI);
    }
    return f;
}

void SceneModel::validate() const {
    background.validate();
    if (human.count > 0) {
        human.validate();
        if (human.num_joints != skeleton.num_joints)
            throw std::runtime_error("SceneModel: human set joint count != skeleton joints");
    }
    if (human.count > 0 && human.sh_degree != background.sh_degree)
        throw std::runtime_error("SceneModel: human and background SH degree must match");
    if (theta.size() != cameras.size())
        throw std::runtime_error("SceneModel: theta frames != camera frames");
    for (const auto& t : theta)
        if (static_cast<int>(t.size()) != skeleton.theta_dim())
            throw std::runtime_error("SceneModel: theta dimension mismatch");
    if (static_cast<int>(beta.size()) != skeleton.num_joints)
        throw std::runtime_error("SceneModel: beta dimension mismatch");
}

const std::array<ParamGroup, kNumParamGroups> kAllParamGroups = {
    ParamGroup::bg_position,   ParamGroup::bg_rotation,  ParamGroup::bg_scale,
    ParamGroup::bg_opacity,    ParamGroup::bg_color,     ParamGroup::human_position,
    ParamGroup::human_rotation, ParamGroup::human_scale, ParamGroup::human_opacity,
    ParamGroup::human_color,   ParamGroup::human_lbs,    ParamGroup::net_offset,
    ParamGroup::net_color,     ParamGroup::net_hash,     ParamGroup::camera,
    ParamGroup::theta,         ParamGroup::beta,
};

const char* param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::bg_position: return "bg_position";
        case ParamGroup::bg_rotation: return "bg_rotation";
        case ParamGroup::bg_scale: return "bg_scale";
        case ParamGroup::bg_opacity: return "bg_opacity";
        case ParamGroup::bg_color: return "bg_color";
        case ParamGroup::human_position: return "human_position";
        case ParamGroup::human_rotation: return "human_rotation";
        case ParamGroup::human_scale: return "human_scale";
        case ParamGroup::human_opacity: return "human_opacity";
        case ParamGroup::human_color: return "human_color";
        case ParamGroup::human_lbs: return "human_lbs";
        case ParamGroup::net_offset: return "net_offset";
        case ParamGroup::net_color: return "net_color";
        case ParamGroup::net_hash: return "net_hash";
        case ParamGroup::camera: return "camera";
        case ParamGroup::theta: return "theta";
        case ParamGroup::beta: return "beta";
    }
    return "?";
}

int lane_count(const SceneModel& model, ParamGroup g) {
    if (g == ParamGroup::camera || g == ParamGroup::theta) return model.frames();
    return 1;
}

std::span<double> param_lane(SceneModel& model, ParamGroup g, int lane) {
    switch (g) {
        case ParamGroup::bg_position: return model.background.mu;
        case ParamGroup::bg_rotation: return model.background.rot;
        case ParamGroup::bg_scale: return model.background.log_scale;
        case ParamGroup::bg_opacity: return model.background.opacity_logit;
        case ParamGroup::bg_color: return model.background.sh;
        case ParamGroup::human_position: return model.human.mu;
        case ParamGroup::human_rotation: return model.human.rot;
        case ParamGroup::human_scale: return model.human.log_scale;
        case ParamGroup::human_opacity: return model.human.opacity_logit;
        case ParamGroup::human_color: return model.human.sh;
        case ParamGroup::human_lbs: return model.human.lbs_logit;
        case ParamGroup::net_offset: return model.net.offset_mlp.weights;
        case ParamGroup::net_color: return model.net.color_mlp.weights;
        case ParamGroup::net_hash: return model.net.hash_table;
        case ParamGroup::camera:
            return {model.cameras[lane].correction.data(), 6};
        case ParamGroup::theta: return model.theta[lane];
        case ParamGroup::beta: return model.beta;
    }
    throw std::logic_error("param_lane: unknown group");
}

std::span<const double> param_lane(const SceneModel& model, ParamGroup g, int lane) {
    auto s = param_lane(const_cast<SceneModel&>(model), g, lane);
    return {s.data(), s.size()};
}

void GaussianGrads::resize_for(const GaussianSet& set) {
    mu.assign(set.mu.size(), 0.0);
    rot.assign(set.rot.size(), 0.0);
    log_scale.assign(set.log_scale.size(), 0.0);
    opacity.assign(set.opacity_logit.size(), 0.0);
    sh.assign(set.sh.size(), 0.0);
    lbs.assign(set.lbs_logit.size(), 0.0);
}

void GaussianGrads::clear() {
    std::fill(mu.begin(), mu.end(), 0.0);
    std::fill(rot.begin(), rot.end(), 0.0);
    std::fill(log_scale.begin(), log_scale.end(), 0.0);
    std::fill(opacity.begin(), opacity.end(), 0.0);
    std::fill(sh.begin(), sh.end(), 0.0);
    std::fill(lbs.begin(), lbs.end(), 0.0);
}

void ModelGrads::resize_for(const SceneModel& model) {
    human.resize_for(model.human);
    background.resize_for(model.background);
    net_offset.assign(model.net.offset_mlp.weights.size(), 0.0);
    net_color.assign(model.net.color_mlp.weights.size(), 0.0);
    net_hash.assign(model.net.hash_table.size(), 0.0);
    camera.assign(model.frames(), std::vector<double>(6, 0.0));
    theta.assign(model.frames(), std::vector<double>(model.skeleton.theta_dim(), 0.0));
    beta.assign(model.beta.size(), 0.0);
    touched.fill(false);
}

void ModelGrads::clear() {
    human.clear();
    background.clear();
    std::fill(net_offset.begin(), net_offset.end(), 0.0);
    std::fill(net_color.begin(), net_color.end(), 0.0);
    std::fill(net_hash.begin(), net_hash.end(), 0.0);
    for (auto& c : camera) std::fill(c.begin(), c.end(), 0.0);
    for (auto& t : theta) std::fill(t.begin(), t.end(), 0.0);
    std::fill(beta.begin(), beta.end(), 0.0);
    touched.fill(false);
}

std::span<double> ModelGrads::lane(ParamGroup g, int l) {
    switch (g) {
        case ParamGroup::bg_position: return background.mu;
        case ParamGroup::bg_rotation: return background.rot;
        case ParamGroup::bg_scale: return background.log_scale;
        case ParamGroup::bg_opacity: return background.opacity;
        case ParamGroup::bg_color: return background.sh;
        case ParamGroup::human_position: return human.mu;
        case ParamGroup::human_rotation: return human.rot;
        case ParamGroup::human_scale: return human.log_scale;
        case ParamGroup::human_opacity: return human.opacity;
        case ParamGroup::human_color: return human.sh;
        case ParamGroup::human_lbs: return human.lbs;
        case ParamGroup::net_offset: return net_offset;
        case ParamGroup::net_color: return net_color;
        case ParamGroup::net_hash: return net_hash;
        case ParamGroup::camera: return camera[l];
        case ParamGroup::theta: return theta[l];
        case ParamGroup::beta: return beta;
    }
    throw std::logic_error("ModelGrads::lane: unknown group");
}

void ModelGrads::accumulate(const ModelGrads& other) {
    for (ParamGroup g : kAllParamGroups) {
        const int lanes = g == ParamGroup::camera ? static_cast<int>(camera.size())
                          : g == ParamGroup::theta ? static_cast<int>(theta.size())
                                                   : 1;
        for (int l = 0; l < lanes; ++l) {
            auto dst = lane(g, l);
            auto src = const_cast<ModelGrads&>(other).lane(g, l);
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        if (other.is_touched(g)) mark(g);
    }
}

double ModelGrads::max_abs(ParamGroup g) const {
    auto& self = const_cast<ModelGrads&>(*this);
    const int lanes = g == ParamGroup::camera ? static_cast<int>(camera.size())
                      : g == ParamGroup::theta ? static_cast<int>(theta.size())
                                               : 1;
    double m = 0.0;
    for (int l = 0; l < lanes; ++l)
        for (double v : self.lane(g, l)) m = std::max(m, std::abs(v));
    return m;
}

namespace {

// Shades one splat: SH color plus optional residual; caches basis and view
// geometry for the backward pass.
void shade_splat(const GaussianSet& set, int i, const Eigen::Vector3d& pos,
                 const Eigen::Vector3d& cam_center, const Eigen::Vector3d& delta_color,
                 int splat_index, FrameRender& fr) {
    const int coeffs = set.sh_coeffs();
    Eigen::Vector3d u = pos - cam_center;
    double dist = u.norm();
    Eigen::Vector3d dir = dist > 1e-12 ? (u / dist).eval() : Eigen::Vector3d::UnitZ().eval();
    fr.view_dir[splat_index] = dir;
    fr.view_dist[splat_index] = dist;

    double* basis = &fr.sh_basis_vals[static_cast<std::size_t>(splat_index) * coeffs];
    sh_basis(dir, set.sh_degree, basis);
    const double* shp = set.sh_at(i);
    Eigen::Vector3d rgb(0.5, 0.5, 0.5);
    for (int k = 0; k < coeffs; ++k) {
        rgb.x() += basis[k] * shp[3 * k];
        rgb.y() += basis[k] * shp[3 * k + 1];
        rgb.z() += basis[k] * shp[3 * k + 2];
    }
    fr.splats.color[splat_index] = rgb + delta_color;
}

}  // namespace

FrameRender render_composite(const SceneModel& model, int frame, RenderMode mode,
                             const RenderSettings& settings, const NonRigidField* nonrigid,
                             const CameraState* camera_override, const double* theta_override) {
    if (frame < 0 || frame >= model.frames())
        throw std::invalid_argument("render_composite: frame out of range");

    FrameRender fr;
    fr.mode = mode;
    fr.frame = frame;
    fr.t_norm = model.t_norm(frame);
    fr.overridden = camera_override != nullptr || theta_override != nullptr;

    const CameraState& camera = camera_override ? *camera_override : model.cameras[frame];
    fr.intrinsics = camera.intrinsics;
    fr.cam_eff = camera.effective();
    fr.cam_rot_eff = fr.cam_eff.rotation.matrix();
    fr.cam_center = -(fr.cam_rot_eff.transpose() * fr.cam_eff.translation);

    const bool want_human = mode != RenderMode::background_only && model.human.count > 0;
    const bool want_bg = mode != RenderMode::human_only_white && model.background.count > 0;
    fr.n_human = want_human ? model.human.count : 0;
    fr.n_bg = want_bg ? model.background.count : 0;
    const int n_splats = fr.n_human + fr.n_bg;
    fr.splats.resize(n_splats);
    const int coeffs = model.background.sh_coeffs();  // degrees match across sets
    fr.sh_basis_vals.assign(static_cast<std::size_t>(n_splats) * coeffs, 0.0);
    fr.view_dir.assign(n_splats, Eigen::Vector3d::Zero());
    fr.view_dist.assign(n_splats, 0.0);

    if (want_human) {
        const int k = model.skeleton.num_joints;
        std::span<const double> theta =
            theta_override ? std::span<const double>(theta_override,
                                                     model.skeleton.theta_dim())
                           : std::span<const double>(model.theta[frame]);
        fk_forward(model.skeleton, theta, model.beta, fr.fk);

        fr.weights.resize(static_cast<std::size_t>(fr.n_human) * k);
        fr.blend.resize(fr.n_human);
        fr.rot_c.resize(fr.n_human);
        fr.m.resize(fr.n_human);
        fr.m_prime.resize(fr.n_human);
        fr.p_lbs.resize(fr.n_human);
        fr.delta_rot.assign(fr.n_human, Eigen::Matrix3d::Identity());

        fr.dynamics_used = model.dynamics_enabled;
        if (fr.dynamics_used) {
            std::vector<Eigen::Vector3d> mu_c(fr.n_human);
            for (int i = 0; i < fr.n_human; ++i) mu_c[i] = model.human.mu_at(i);
            net_forward(model.net, mu_c, fr.t_norm, fr.net_cache);
        }

        for (int i = 0; i < fr.n_human; ++i) {
            double* w = &fr.weights[static_cast<std::size_t>(i) * k];
            model.human.lbs_weights(i, w);
            const Eigen::Vector3d mu = model.human.mu_at(i);
            Eigen::Vector3d p = Eigen::Vector3d::Zero();
            Eigen::Matrix3d blend = Eigen::Matrix3d::Zero();
            for (int j = 0; j < k; ++j) {
                if (w[j] == 0.0) continue;
                p += w[j] * (fr.fk.global_rot[j] * mu + fr.fk.pose_trans[j]);
                blend += w[j] * fr.fk.global_rot[j];
            }
            fr.p_lbs[i] = p;
            fr.blend[i] = blend;
            fr.rot_c[i] = quat_to_matrix(model.human.rot_at(i));
            fr.m[i] = blend * fr.rot_c[i];

            Eigen::Vector3d pos = p;
            Eigen::Vector3d delta_color = Eigen::Vector3d::Zero();
            if (fr.dynamics_used) {
                const NetOutputs& out = fr.net_cache.outputs[i];
                pos += out.delta_mu;
                fr.delta_rot[i] = so3_exp_matrix(out.delta_rot_aa);
                delta_color = out.delta_color;
            }
            if (nonrigid) pos += nonrigid->eval(mu, fr.t_norm);
            fr.m_prime[i] = fr.dynamics_used ? (fr.m[i] * fr.delta_rot[i]).eval() : fr.m[i];

            fr.splats.position[i] = pos;
            fr.splats.covariance[i] = build_covariance(fr.m_prime[i], model.human.scale_at(i));
            fr.splats.opacity[i] = model.human.opacity_at(i);
            shade_splat(model.human, i, pos, fr.cam_center, delta_color, i, fr);
        }
    }

    if (want_bg) {
        for (int i = 0; i < fr.n_bg; ++i) {
            const int s = fr.n_human + i;
            const Eigen::Vector3d pos = model.background.mu_at(i);
            fr.splats.position[s] = pos;
            fr.splats.covariance[s] = build_covariance(quat_to_matrix(model.background.rot_at(i)),
                                                       model.background.scale_at(i));
            fr.splats.opacity[s] = model.background.opacity_at(i);
            shade_splat(model.background, i, pos, fr.cam_center, Eigen::Vector3d::Zero(), s, fr);
        }
    }

    RenderOptions opts;
    opts.with_depth = settings.with_depth;
    opts.background = mode == RenderMode::human_only_white ? Eigen::Vector3d::Ones()
                                                           : settings.clear_color;
    fr.image = rasterize(fr.splats, fr.intrinsics, fr.cam_eff, opts, &fr.ws);
    return fr;
}

void render_backward(const SceneModel& model, const FrameRender& fr, const ImageGrad& grad_image,
                     const GradSinkMask& mask, ModelGrads& grads) {
    if (fr.overridden)
        throw std::logic_error("render_backward: frame was rendered with overridden parameters");

    const RasterGrads rg =
        rasterize_backward(fr.splats, fr.intrinsics, fr.cam_eff, fr.ws, grad_image);

    Eigen::Matrix3d d_cam_rot = rg.cam_rot;
    Eigen::Vector3d d_cam_trans = rg.cam_trans;
    Eigen::Vector3d d_cam_center = Eigen::Vector3d::Zero();

    const int k = model.skeleton.num_joints;
    std::vector<Eigen::Matrix3d> d_joint_rot;
    std::vector<Eigen::Vector3d> d_joint_trans;
    const bool need_body = fr.n_human > 0 && (mask.theta || mask.beta);
    if (need_body) {
        d_joint_rot.assign(k, Eigen::Matrix3d::Zero());
        d_joint_trans.assign(k, Eigen::Vector3d::Zero());
    }

    NetGrads net_sinks;
    if (fr.dynamics_used && mask.net) {
        net_sinks.offset_weights = &grads.net_offset;
        net_sinks.color_weights = &grads.net_color;
        net_sinks.hash_table = &grads.net_hash;
    }

    std::vector<double> d_w(k, 0.0);

    // ---- per-splat shading + geometry chains ----
    for (int s = 0; s < fr.n_human + fr.n_bg; ++s) {
        const bool is_human = s < fr.n_human;
        const int i = is_human ? s : s - fr.n_human;
        const GaussianSet& set = is_human ? model.human : model.background;
        GaussianGrads& gset = is_human ? grads.human : grads.background;
        const bool want_set = is_human ? mask.human_gaussians : mask.bg_gaussians;

        const Eigen::Vector3d d_rgb = rg.color[s];
        Eigen::Vector3d d_pos = rg.position[s];

        // color: rgb = 0.5 + sum basis*sh (+ delta_c)
        const int coeffs = set.sh_coeffs();
        const double* basis = &fr.sh_basis_vals[static_cast<std::size_t>(s) * coeffs];
        if (!d_rgb.isZero(0.0)) {
            if (want_set) {
                double* gsh = &gset.sh[static_cast<std::size_t>(i) * coeffs * 3];
                for (int c = 0; c < coeffs; ++c) {
                    gsh[3 * c] += basis[c] * d_rgb.x();
                    gsh[3 * c + 1] += basis[c] * d_rgb.y();
                    gsh[3 * c + 2] += basis[c] * d_rgb.z();
                }
            }
            if (set.sh_degree > 0 && fr.view_dist[s] > 1e-12) {
                // view-direction path: dir = (p - cam_center)/|p - cam_center|
                Eigen::Vector3d basis_grad_dir = Eigen::Vector3d::Zero();
                Eigen::Vector3d gb[16];
                sh_basis_grad(fr.view_dir[s], set.sh_degree, gb);
                const double* shp = set.sh_at(i);
                for (int c = 0; c < coeffs; ++c) {
                    const double wch = shp[3 * c] * d_rgb.x() + shp[3 * c + 1] * d_rgb.y() +
                                       shp[3 * c + 2] * d_rgb.z();
                    basis_grad_dir += wch * gb[c];
                }
                const Eigen::Vector3d dir = fr.view_dir[s];
                const Eigen::Vector3d d_u =
                    (basis_grad_dir - dir * dir.dot(basis_grad_dir)) / fr.view_dist[s];
                d_pos += d_u;
                d_cam_center -= d_u;
            }
        }

        // opacity logit
        if (want_set) {
            const double o = fr.splats.opacity[s];
            gset.opacity[i] += rg.opacity[s] * o * (1.0 - o);
        }

        // covariance: Sigma = M' D M'^T, D = diag(exp(log_s)^2)
        const Eigen::Matrix3d& g_cov = rg.covariance[s];
        const Eigen::Matrix3d m_prime = is_human ? fr.m_prime[i]
                                                 : quat_to_matrix(set.rot_at(i));
        const Eigen::Vector3d scale = set.scale_at(i);
        Eigen::Matrix3d d_m_prime = Eigen::Matrix3d::Zero();
        if (!g_cov.isZero(0.0)) {
            const Eigen::Matrix3d sym = g_cov + g_cov.transpose();
            d_m_prime = sym * m_prime * scale.cwiseAbs2().asDiagonal();
            if (want_set) {
                for (int a = 0; a < 3; ++a) {
                    const Eigen::Vector3d col = m_prime.col(a);
                    gset.log_scale[3 * i + a] +=
                        2.0 * scale[a] * scale[a] * col.dot(g_cov * col);
                }
            }
        }

        if (is_human) {
            // M' = M * deltaR; M = blend * R_c
            Eigen::Matrix3d d_m = fr.dynamics_used
                                      ? (d_m_prime * fr.delta_rot[i].transpose()).eval()
                                      : d_m_prime;
            Eigen::Vector3d d_delta_rot_aa = Eigen::Vector3d::Zero();
            if (fr.dynamics_used && !d_m_prime.isZero(0.0)) {
                const Eigen::Matrix3d d_delta_rot = fr.m[i].transpose() * d_m_prime;
                d_delta_rot_aa =
                    so3_exp_backward(fr.net_cache.outputs[i].delta_rot_aa, d_delta_rot);
            }
            const Eigen::Matrix3d d_blend_from_rot = d_m * fr.rot_c[i].transpose();
            if (want_set && !d_m.isZero(0.0)) {
                const Eigen::Matrix3d d_rot_c = fr.blend[i].transpose() * d_m;
                const Eigen::Vector4d d_quat =
                    quat_to_matrix_backward(set.rot_at(i), d_rot_c);
                for (int a = 0; a < 4; ++a) gset.rot[4 * i + a] += d_quat[a];
            }

            // positions: p_splat = p_lbs + delta_mu (+ constant field)
            const Eigen::Vector3d d_p_lbs = d_pos;
            const Eigen::Vector3d d_delta_mu = d_pos;

            if (fr.dynamics_used &&
                (mask.net || mask.human_gaussians)) {
                Eigen::Vector3d d_mu_from_net = Eigen::Vector3d::Zero();
                net_backward(model.net, fr.net_cache, i, d_delta_mu, d_delta_rot_aa,
                             d_rgb /* color residual grad == pixel color grad */, net_sinks,
                             mask.human_gaussians ? &d_mu_from_net : nullptr);
                if (mask.human_gaussians)
                    for (int a = 0; a < 3; ++a) gset.mu[3 * i + a] += d_mu_from_net[a];
            }

            // LBS: p_lbs = sum_k w_k (A_k mu + q_k); blend = sum_k w_k A_k
            const double* w = &fr.weights[static_cast<std::size_t>(i) * k];
            const Eigen::Vector3d mu = set.mu_at(i);
            if (want_set) {
                const Eigen::Vector3d d_mu = fr.blend[i].transpose() * d_p_lbs;
                for (int a = 0; a < 3; ++a) gset.mu[3 * i + a] += d_mu[a];
            }
            const bool need_w = want_set;
            if (need_w)
                for (int j = 0; j < k; ++j) d_w[j] = 0.0;
            for (int j = 0; j < k; ++j) {
                if (w[j] == 0.0) continue;
                const Eigen::Vector3d posed = fr.fk.global_rot[j] * mu + fr.fk.pose_trans[j];
                if (need_w)
                    d_w[j] = d_p_lbs.dot(posed) +
                             d_blend_from_rot.cwiseProduct(fr.fk.global_rot[j]).sum();
                if (need_body) {
                    d_joint_rot[j] += w[j] * (d_p_lbs * mu.transpose() + d_blend_from_rot);
                    d_joint_trans[j] += w[j] * d_p_lbs;
                }
            }
            if (need_w) {
                // softmax backward
                double dot = 0.0;
                for (int j = 0; j < k; ++j)
                    if (w[j] != 0.0) dot += d_w[j] * w[j];
                for (int j = 0; j < k; ++j)
                    if (w[j] != 0.0)
                        gset.lbs[static_cast<std::size_t>(i) * k + j] += w[j] * (d_w[j] - dot);
            }
        } else {
            // background: M' = R_c, position is the parameter itself
            if (want_set) {
                if (!d_m_prime.isZero(0.0)) {
                    const Eigen::Vector4d d_quat =
                        quat_to_matrix_backward(set.rot_at(i), d_m_prime);
                    for (int a = 0; a < 4; ++a) gset.rot[4 * i + a] += d_quat[a];
                }
                for (int a = 0; a < 3; ++a) gset.mu[3 * i + a] += d_pos[a];
            }
        }
    }

    if (fr.n_human > 0 && mask.human_gaussians) {
        grads.mark(ParamGroup::human_position);
        grads.mark(ParamGroup::human_rotation);
        grads.mark(ParamGroup::human_scale);
        grads.mark(ParamGroup::human_opacity);
        grads.mark(ParamGroup::human_color);
        grads.mark(ParamGroup::human_lbs);
    }
    if (fr.n_bg > 0 && mask.bg_gaussians) {
        grads.mark(ParamGroup::bg_position);
        grads.mark(ParamGroup::bg_rotation);
        grads.mark(ParamGroup::bg_scale);
        grads.mark(ParamGroup::bg_opacity);
        grads.mark(ParamGroup::bg_color);
    }
    if (fr.dynamics_used && mask.net) {
        grads.mark(ParamGroup::net_offset);
        grads.mark(ParamGroup::net_color);
        grads.mark(ParamGroup::net_hash);
    }

    // ---- body chain ----
    if (need_body) {
        std::vector<double> d_theta(model.skeleton.theta_dim(), 0.0);
        std::vector<double> d_beta(k, 0.0);
        fk_backward(model.skeleton, model.theta[fr.frame], model.beta, fr.fk, d_joint_rot,
                    d_joint_trans, d_theta, d_beta);
        if (mask.theta) {
            auto& dst = grads.theta[fr.frame];
            for (std::size_t a = 0; a < dst.size(); ++a) dst[a] += d_theta[a];
            grads.mark(ParamGroup::theta);
        }
        if (mask.beta) {
            for (int a = 0; a < k; ++a) grads.beta[a] += d_beta[a];
            grads.mark(ParamGroup::beta);
        }
    }

    // ---- camera chain ----
    if (mask.camera) {
        // cam_center = -R_eff^T t_eff
        d_cam_rot += -fr.cam_eff.translation * d_cam_center.transpose();
        d_cam_trans += -(fr.cam_rot_eff * d_cam_center);

        // R_eff = R_delta R_base; t_eff = R_delta t_base + u
        const CameraState& cam = model.cameras[fr.frame];
        const Eigen::Matrix3d base_rot = cam.base.rotation.matrix();
        Eigen::Matrix3d d_delta_rot = d_cam_rot * base_rot.transpose();
        d_delta_rot += d_cam_trans * cam.base.translation.transpose();
        const Eigen::Vector3d d_omega =
            so3_exp_backward(cam.correction.head<3>(), d_delta_rot);
        auto& dst = grads.camera[fr.frame];
        for (int a = 0; a < 3; ++a) dst[a] += d_omega[a];
        for (int a = 0; a < 3; ++a) dst[3 + a] += d_cam_trans[a];
        grads.mark(ParamGroup::camera);
    }
}

}  // namespace jgs
