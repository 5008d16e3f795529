#include "jgs/harness.hpp"

#include <cmath>
#include <stdexcept>

#include "jgs/knn.hpp"
#include "jgs/objectives.hpp"
#include "jgs/rng.hpp"

namespace jgs {

namespace {

// Derived seeds for the independent random streams of one run (splitmix64).
uint64_t stream_seed(uint64_t base, uint64_t stream) {
    uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr uint64_t kStreamSkeleton = 1;
constexpr uint64_t kStreamHumanGt = 2;
constexpr uint64_t kStreamBackground = 3;
constexpr uint64_t kStreamMotion = 4;
constexpr uint64_t kStreamDress = 5;
constexpr uint64_t kStreamNonRigid = 6;
constexpr uint64_t kStreamNoise = 7;
constexpr uint64_t kStreamModelInit = 8;
constexpr uint64_t kStreamNet = 9;

// world -> camera; camera frame: x right, y down, z forward (y-up world).
RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
    const Eigen::Vector3d fwd = (target - eye).normalized();
    Eigen::Vector3d up(0, 1, 0);
    if (std::abs(fwd.dot(up)) > 0.999) up = Eigen::Vector3d(1, 0, 0);
    const Eigen::Vector3d x_axis = fwd.cross(up).normalized();
    const Eigen::Vector3d y_axis = fwd.cross(x_axis);  // points down in image space
    Eigen::Matrix3d r;
    r.row(0) = x_axis.transpose();
    r.row(1) = y_axis.transpose();
    r.row(2) = fwd.transpose();
    RigidTransform t;
    t.rotation = Rotation::from_matrix(r);
    t.translation = -(r * eye);
    return t;
}

void clamp_scales(GaussianSet& set, double max_scale) {
    const double cap = std::log(max_scale);
    for (auto& v : set.log_scale) v = std::min(v, cap);
}

Eigen::Vector3d texture_color(const Eigen::Vector3d& p, double freq) {
    // Smooth multi-frequency color field; rich enough gradients to anchor
    // photometric camera alignment.
    const double f = 2.0 * M_PI * freq;
    Eigen::Vector3d c;
    c.x() = 0.45 + 0.28 * std::sin(f * (0.9 * p.x() + 0.4 * p.y()) + 0.3) +
            0.12 * std::sin(3.1 * f * (0.3 * p.z() - 0.8 * p.y()) + 1.1);
    c.y() = 0.45 + 0.28 * std::sin(f * (0.7 * p.z() - 0.5 * p.x()) + 2.1) +
            0.12 * std::sin(2.7 * f * (0.6 * p.y() + 0.4 * p.x()) + 0.7);
    c.z() = 0.45 + 0.28 * std::sin(f * (0.8 * p.y() + 0.6 * p.z()) + 4.0) +
            0.12 * std::sin(3.7 * f * (0.5 * p.x() - 0.3 * p.z()) + 2.9);
    return c.cwiseMax(0.03).cwiseMin(0.97);
}

}  // namespace

std::vector<double> SceneBundle::binary_mask(int frame) const {
    std::vector<double> out(masks[frame].size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = masks[frame][i] > 0.5 ? 1.0 : 0.0;
    return out;
}

SceneBundle generate_scene(const RunConfig& config) {
    config.validate();
    SceneBundle b;
    b.config = config;
    b.frames = config.frames;
    b.seed = static_cast<uint64_t>(config.seed);

    // body
    if (config.joints == 24) {
        b.skeleton = Skeleton::humanoid(config.body_height, config.n_surface_vertices,
                                        stream_seed(b.seed, kStreamSkeleton),
                                        config.capsule_radius_scale);
    } else if (config.joints == 1) {
        b.skeleton = Skeleton::single_capsule(0.4 * config.body_height, 0.08 * config.body_height,
                                              config.n_surface_vertices,
                                              stream_seed(b.seed, kStreamSkeleton));
    } else {
        b.skeleton = Skeleton::chain(config.joints, config.body_height, config.n_surface_vertices,
                                     stream_seed(b.seed, kStreamSkeleton));
    }
    const int k = b.skeleton.num_joints;

    // ground-truth human Gaussians: surface init, then per-Gaussian appearance
    // variation so a fresh fit has something to learn
    if (config.n_human > 0) {
        b.gt_human = init_human_gaussians(b.skeleton, config.n_human,
                                          stream_seed(b.seed, kStreamHumanGt), config.sh_degree);
        Rng dress(stream_seed(b.seed, kStreamDress));
        const double opacity_logit = std::log(0.92 / 0.08);
        for (int i = 0; i < b.gt_human.count; ++i) {
            b.gt_human.opacity_logit[i] = opacity_logit + dress.normal(0.25);
            for (int a = 0; a < 3; ++a) b.gt_human.log_scale[3 * i + a] += dress.normal(0.12);
            double* sh = &b.gt_human.sh[static_cast<std::size_t>(i) * b.gt_human.sh_coeffs() * 3];
            for (int c = 0; c < 3; ++c) sh[c] += dress.normal(0.05) / 0.28209479177387814;
            if (config.sh_degree >= 1)
                for (int c = 3; c < 12; ++c) sh[c] += dress.normal(0.02);
        }
    } else {
        b.gt_human.kind = GaussianKind::human;
        b.gt_human.sh_degree = config.sh_degree;
        b.gt_human.num_joints = k;
        b.gt_human.resize(0);
    }

    // Background cloud: a floor disc under the body plus a wide flat
    // backdrop behind it. No background geometry ever comes near a camera;
    // points close to a lens would project to giant high-opacity blobs that
    // blanket the frame.
    {
        Rng rng(stream_seed(b.seed, kStreamBackground));
        const double d = config.camera_distance;
        const double floor_radius = 0.55 * d;
        const double backdrop_z = -(0.6 * d + 0.3);
        const double backdrop_halfw = 2.0 * d;
        const double backdrop_y0 = -0.3 * config.body_height;
        const double backdrop_y1 = 2.2 * config.body_height;
        const double floor_area = M_PI * floor_radius * floor_radius;
        const double backdrop_area = 2.0 * backdrop_halfw * (backdrop_y1 - backdrop_y0);
        std::vector<Eigen::Vector3d> points;
        std::vector<Eigen::Vector3d> colors;
        points.reserve(config.n_background);
        const int n_floor = std::max(
            1, static_cast<int>(config.n_background * floor_area / (floor_area + backdrop_area)));
        for (int i = 0; i < n_floor; ++i) {
            const double r = floor_radius * std::sqrt(rng.uniform());
            const double a = rng.uniform(0.0, 2.0 * M_PI);
            points.emplace_back(r * std::cos(a), 0.0, r * std::sin(a));
        }
        for (int i = n_floor; i < config.n_background; ++i)
            points.emplace_back(rng.uniform(-backdrop_halfw, backdrop_halfw),
                                rng.uniform(backdrop_y0, backdrop_y1), backdrop_z);
        colors.reserve(points.size());
        for (const auto& p : points) {
            Eigen::Vector3d c = texture_color(p, config.texture_freq);
            c += rng.normal3(0.015);
            colors.push_back(c.cwiseMax(0.02).cwiseMin(0.98));
        }
        b.gt_background = init_background_gaussians(points, colors, config.sh_degree);
        const double opacity_logit = std::log(0.92 / 0.08);
        for (int i = 0; i < b.gt_background.count; ++i)
            b.gt_background.opacity_logit[i] = opacity_logit + rng.normal(0.2);
        clamp_scales(b.gt_background, 0.15 * config.body_height);
        b.scene_radius = 0.0;
        for (const auto& p : points) b.scene_radius = std::max(b.scene_radius, p.norm());
    }

    // cameras: smooth orbit around the body
    {
        const Eigen::Vector3d target(0.0, 0.55 * config.body_height, 0.0);
        CameraIntrinsics intr;
        intr.width = config.image_width;
        intr.height = config.image_height;
        intr.fx = intr.fy =
            0.5 * config.image_width / std::tan(0.5 * config.fov_deg * M_PI / 180.0);
        intr.cx = 0.5 * config.image_width;
        intr.cy = 0.5 * config.image_height;
        for (int t = 0; t < b.frames; ++t) {
            const double u = b.frames > 1 ? static_cast<double>(t) / (b.frames - 1) : 0.5;
            const double phi = (u - 0.5) * config.camera_orbit_deg * M_PI / 180.0;
            Eigen::Vector3d eye(config.camera_distance * std::sin(phi),
                                config.camera_height + 0.08 * std::sin(2.0 * M_PI * u),
                                config.camera_distance * std::cos(phi));
            CameraState cam;
            cam.intrinsics = intr;
            cam.base = look_at(eye, target);
            b.gt_cameras.push_back(cam);
        }
    }

    // body motion: smooth per-joint sinusoids, root sway
    {
        Rng rng(stream_seed(b.seed, kStreamMotion));
        std::vector<Eigen::Vector3d> axis(k);
        std::vector<double> phase(k), cycles(k), rel(k);
        for (int j = 0; j < k; ++j) {
            axis[j] = rng.unit_vector();
            phase[j] = rng.uniform(0.0, 2.0 * M_PI);
            cycles[j] = 0.5 + rng.uniform() * 1.0;
            rel[j] = 0.35 + 0.65 * rng.uniform();
        }
        if (k == 24) {
            // calmer torso, livelier limbs
            const int torso[] = {0, 3, 6, 9, 12, 13, 14, 15};
            for (int j : torso) rel[j] *= 0.3;
        }
        const double sway = 0.03 * config.motion_amplitude * config.body_height;
        for (int t = 0; t < b.frames; ++t) {
            const double u = b.frames > 1 ? static_cast<double>(t) / (b.frames - 1) : 0.0;
            std::vector<double> theta(b.skeleton.theta_dim(), 0.0);
            for (int j = 0; j < k; ++j) {
                const double ang = config.motion_amplitude * rel[j] *
                                   std::sin(2.0 * M_PI * cycles[j] * u + phase[j]);
                for (int a = 0; a < 3; ++a) theta[3 * j + a] = ang * axis[j][a];
            }
            theta[3 * k + 0] = sway * std::sin(2.0 * M_PI * u);
            theta[3 * k + 2] = sway * std::cos(2.0 * M_PI * u + 1.3);
            b.gt_theta.push_back(std::move(theta));
        }
        b.gt_beta.assign(k, 1.0);
    }

    b.nonrigid = NonRigidField::make(config.nonrigid_amplitude, config.nonrigid_spatial_freq,
                                     config.nonrigid_temporal_freq,
                                     stream_seed(b.seed, kStreamNonRigid));

    // render ground-truth frames and masks with the production renderer
    {
        SceneModel gt = gt_model(b);
        RenderSettings settings;
        for (int t = 0; t < b.frames; ++t) {
            FrameRender full = render_composite(gt, t, RenderMode::full, settings, &b.nonrigid);
            b.images.push_back(std::move(full.image));
            FrameRender hum =
                render_composite(gt, t, RenderMode::human_only_white, settings, &b.nonrigid);
            b.masks.push_back(hum.image.alpha);
        }
    }

    // initialization = ground truth, then corrupted per the configured sigma
    b.init_theta = b.gt_theta;
    b.init_beta = b.gt_beta;
    b.init_cameras = b.gt_cameras;
    NoiseSpec noise;
    noise.sigma = config.noise_sigma;
    noise.perturb_beta = config.perturb_beta;
    perturb_init(b, noise, stream_seed(b.seed, kStreamNoise));
    return b;
}

void perturb_init(SceneBundle& b, const NoiseSpec& noise, uint64_t seed) {
    if (noise.sigma < 0.0) throw std::invalid_argument("perturb_init: sigma must be >= 0");
    b.init_theta = b.gt_theta;
    b.init_beta = b.gt_beta;
    b.init_cameras = b.gt_cameras;
    if (noise.sigma == 0.0) return;

    Rng rng(seed);
    const int k = b.skeleton.num_joints;
    for (int t = 0; t < b.frames; ++t) {
        const Eigen::Vector3d rot_noise = rng.normal3(noise.sigma);
        const Eigen::Vector3d trans_noise = rng.normal3(noise.sigma * b.scene_radius);
        RigidTransform delta;
        delta.rotation = so3_exp(rot_noise);
        delta.translation = trans_noise;
        b.init_cameras[t].base = se3_compose(delta, b.gt_cameras[t].base);
        for (int j = 0; j < 3 * k; ++j) b.init_theta[t][j] += rng.normal(noise.sigma);
    }
    if (noise.perturb_beta)
        for (int j = 0; j < k; ++j)
            b.init_beta[j] = std::max(0.05, b.init_beta[j] + rng.normal(noise.sigma));
}

namespace {

TemporalNet make_net(const RunConfig& config, const Skeleton& skel, uint64_t seed) {
    TemporalNet net;
    net.cfg.grid.levels = config.hash_levels;
    net.cfg.grid.table_size = config.hash_table_size;
    net.cfg.grid.features = config.hash_features;
    net.cfg.grid.base_resolution = config.hash_base_resolution;
    net.cfg.grid.growth = config.hash_growth;
    net.cfg.position_encoding =
        config.use_hash_encoding ? PositionEncoding::hash : PositionEncoding::frequency;
    net.cfg.freq_time_L = config.freq_time_L;
    net.cfg.freq_pos_L = config.freq_pos_L;
    net.cfg.hidden = config.mlp_hidden;

    // canonical-space bounding box from the body surface, padded
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(-0.5 * config.body_height);
    Eigen::Vector3d hi = Eigen::Vector3d::Constant(1.2 * config.body_height);
    if (!skel.vertices.empty()) {
        lo = hi = skel.vertices[0];
        for (const auto& v : skel.vertices) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        const Eigen::Vector3d pad = 0.2 * (hi - lo) + Eigen::Vector3d::Constant(0.05);
        lo -= pad;
        hi += pad;
    }
    net.cfg.grid.bbox_min = lo;
    net.cfg.grid.bbox_max = hi;
    net.init(seed);
    return net;
}

}  // namespace

SceneModel gt_model(const SceneBundle& b) {
    SceneModel m;
    m.human = b.gt_human;
    m.background = b.gt_background;
    m.skeleton = b.skeleton;
    m.theta = b.gt_theta;
    m.beta = b.gt_beta;
    m.cameras = b.gt_cameras;
    m.net = make_net(b.config, b.skeleton, stream_seed(b.seed, kStreamNet));
    m.dynamics_enabled = false;  // residuals are zero-initialized; skip the evaluation
    return m;
}

FrameRender render_gt_frame(const SceneBundle& b, int frame, RenderMode mode) {
    SceneModel gt = gt_model(b);
    return render_composite(gt, frame, mode, RenderSettings{}, &b.nonrigid);
}

SceneModel initial_model(const SceneBundle& b) {
    const RunConfig& config = b.config;
    SceneModel m;
    m.skeleton = b.skeleton;
    if (config.n_human > 0) {
        m.human = init_human_gaussians(b.skeleton, config.n_human,
                                       stream_seed(b.seed, kStreamModelInit), config.sh_degree);
    } else {
        m.human.kind = GaussianKind::human;
        m.human.sh_degree = config.sh_degree;
        m.human.num_joints = b.skeleton.num_joints;
        m.human.resize(0);
    }
    {
        // the ground-truth background points and their colors stand in for the
        // sparse reconstruction an SfM pipeline would hand us
        std::vector<Eigen::Vector3d> points(b.gt_background.count);
        std::vector<Eigen::Vector3d> colors(b.gt_background.count);
        for (int i = 0; i < b.gt_background.count; ++i) {
            points[i] = b.gt_background.mu_at(i);
            const double* sh = b.gt_background.sh_at(i);
            colors[i] = Eigen::Vector3d(0.5 + 0.28209479177387814 * sh[0],
                                        0.5 + 0.28209479177387814 * sh[1],
                                        0.5 + 0.28209479177387814 * sh[2])
                            .cwiseMax(0.0)
                            .cwiseMin(1.0);
        }
        m.background = init_background_gaussians(points, colors, config.sh_degree);
        clamp_scales(m.background, 0.15 * config.body_height);
    }
    m.theta = b.init_theta;
    m.beta = b.init_beta;
    m.cameras = b.init_cameras;
    m.net = make_net(config, b.skeleton, stream_seed(b.seed, kStreamNet));
    m.dynamics_enabled = !config.disable_dynamics;
    m.validate();
    return m;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("psnr: image shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = a.rgb[i] - b.rgb[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.rgb.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim_metric(const ImageBuffer& a, const ImageBuffer& b) { return ssim_index(a, b); }

Split split_of(int frame) {
    const int r = frame % 10;
    if (r == 8) return Split::val;
    if (r == 9) return Split::test;
    return Split::train;
}

std::vector<int> frames_of_split(int total_frames, Split split) {
    std::vector<int> out;
    for (int t = 0; t < total_frames; ++t)
        if (split_of(t) == split) out.push_back(t);
    return out;
}

double mean_joint_position_error(const Skeleton& skel,
                                 const std::vector<std::vector<double>>& theta_a,
                                 const std::vector<double>& beta_a,
                                 const std::vector<std::vector<double>>& theta_b,
                                 const std::vector<double>& beta_b) {
    if (theta_a.size() != theta_b.size())
        throw std::invalid_argument("mean_joint_position_error: frame count mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < theta_a.size(); ++t) {
        const auto pa = posed_joint_positions(skel, theta_a[t], beta_a);
        const auto pb = posed_joint_positions(skel, theta_b[t], beta_b);
        for (int j = 0; j < skel.num_joints; ++j) {
            sum += (pa[j] - pb[j]).norm();
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

ImageBuffer composite_on_white(const ImageBuffer& image, const std::vector<double>& mask) {
    ImageBuffer out;
    out.resize(image.width, image.height);
    for (int p = 0; p < image.pixels(); ++p) {
        const double m = mask[p];
        for (int c = 0; c < 3; ++c)
            out.rgb[3 * p + c] = m * image.rgb[3 * p + c] + (1.0 - m) * 1.0;
        out.alpha[p] = m;
    }
    return out;
}

}  // namespace jgs
