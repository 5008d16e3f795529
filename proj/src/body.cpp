#include "jgs/body.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "jgs/rng.hpp"

namespace jgs {

namespace {

void orthonormal_frame(const Eigen::Vector3d& axis, Eigen::Vector3d& n1, Eigen::Vector3d& n2) {
    const Eigen::Vector3d ref =
        std::abs(axis.y()) < 0.9 ? Eigen::Vector3d::UnitY() : Eigen::Vector3d::UnitX();
    n1 = axis.cross(ref).normalized();
    n2 = axis.cross(n1);
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

void Skeleton::finalize() {
    if (num_joints < 1) throw std::invalid_argument("Skeleton: needs at least one joint");
    if (static_cast<int>(parent.size()) != num_joints ||
        static_cast<int>(rest_offset.size()) != num_joints)
        throw std::invalid_argument("Skeleton: parent/offset arrays must match joint count");
    if (parent[0] != -1) throw std::invalid_argument("Skeleton: joint 0 must be the root");
    rest_global.resize(num_joints);
    for (int j = 0; j < num_joints; ++j) {
        if (j > 0 && (parent[j] < 0 || parent[j] >= j))
            throw std::invalid_argument("Skeleton: parents must precede children");
        rest_global[j] = (j == 0 ? Eigen::Vector3d::Zero().eval() : rest_global[parent[j]]) +
                         rest_offset[j];
    }
}

Eigen::Vector3d Skeleton::albedo_at(const Eigen::Vector3d& p, int capsule) const {
    const int owner = capsules[capsule].joint_a;
    // Body-part base colors: legs, torso, lower arms/head, everything else.
    Eigen::Vector3d base(0.72, 0.34, 0.26);  // torso / upper limbs
    if ((owner >= 1 && owner <= 2) || (owner >= 4 && owner <= 5) || (owner >= 7 && owner <= 8))
        base = {0.24, 0.30, 0.56};
    else if (owner == 12 || owner == 15 || owner >= 18)
        base = {0.78, 0.64, 0.52};
    const double h = std::max(1e-6, rest_global.empty() ? 1.0 : 2.0 * rest_global[0].y());
    const double stripes =
        0.80 + 0.20 * std::sin(2.0 * M_PI * (6.0 * p.y() + 2.5 * p.x() + 1.5 * p.z()) / h);
    Eigen::Vector3d c = base * stripes;
    return c.cwiseMax(0.05).cwiseMin(0.95);
}

std::vector<SurfaceSample> Skeleton::sample_surface(int n, uint64_t seed) const {
    if (capsules.empty()) throw std::runtime_error("Skeleton: no capsules to sample");
    std::vector<double> area(capsules.size());
    double total = 0.0;
    for (std::size_t c = 0; c < capsules.size(); ++c) {
        const double len = (capsules[c].b - capsules[c].a).norm();
        const double r = capsules[c].radius;
        area[c] = 2.0 * M_PI * r * len + 4.0 * M_PI * r * r;
        total += area[c];
    }

    Rng rng(seed);
    std::vector<SurfaceSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        double pick = rng.uniform() * total;
        std::size_t c = 0;
        while (c + 1 < capsules.size() && pick > area[c]) {
            pick -= area[c];
            ++c;
        }
        const Capsule& cap = capsules[c];
        const Eigen::Vector3d ab = cap.b - cap.a;
        const double len = ab.norm();
        const double side = 2.0 * M_PI * cap.radius * len;
        const double caps_area = 4.0 * M_PI * cap.radius * cap.radius;
        Eigen::Vector3d axis = len > 1e-12 ? (ab / len).eval() : Eigen::Vector3d::UnitY().eval();

        SurfaceSample s;
        s.capsule = static_cast<int>(c);
        if (rng.uniform() * (side + caps_area) < side && len > 1e-12) {
            Eigen::Vector3d n1, n2;
            orthonormal_frame(axis, n1, n2);
            const double t = rng.uniform();
            const double phi = rng.uniform(0.0, 2.0 * M_PI);
            s.position = cap.a + axis * (t * len) +
                         cap.radius * (std::cos(phi) * n1 + std::sin(phi) * n2);
        } else {
            Eigen::Vector3d v = rng.unit_vector();
            const bool far_end = rng.uniform() < 0.5;
            if (far_end) {
                if (v.dot(axis) < 0.0) v = -v;
                s.position = cap.b + cap.radius * v;
            } else {
                if (v.dot(axis) > 0.0) v = -v;
                s.position = cap.a + cap.radius * v;
            }
        }
        out.push_back(s);
    }
    return out;
}

void Skeleton::build_vertices(int n_vertices, uint64_t seed) {
    const auto samples = sample_surface(n_vertices, seed);
    vertices.resize(samples.size());
    vertex_albedo.resize(samples.size());
    vertex_weights.assign(samples.size() * static_cast<std::size_t>(num_joints), 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        vertices[i] = samples[i].position;
        vertex_albedo[i] = albedo_at(samples[i].position, samples[i].capsule);

        const Capsule& cap = capsules[samples[i].capsule];
        double* row = &vertex_weights[i * static_cast<std::size_t>(num_joints)];
        double ramp = 0.0;
        if (cap.joint_b >= 0) {
            const Eigen::Vector3d ab = cap.b - cap.a;
            const double len2 = ab.squaredNorm();
            const double t = len2 > 1e-18
                                 ? clamp01((samples[i].position - cap.a).dot(ab) / len2)
                                 : 0.0;
            // Pure joint_a along the shaft, 50/50 blend at the far joint.
            ramp = 0.5 * clamp01((t - 0.7) / 0.3);
        }
        row[cap.joint_a] += 1.0 - ramp;
        if (cap.joint_b >= 0) row[cap.joint_b] += ramp;
    }
}

Skeleton Skeleton::humanoid(double height, int n_vertices, uint64_t seed, double radius_scale) {
    const double h = height;
    Skeleton s;
    s.num_joints = 24;
    s.parent = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
    const double ox[24] = {0,    0.06,  -0.06, 0,    0.01,  -0.01, 0,    0,     0,
                           0,    0.01,  -0.01, 0,    0.045, -0.045, 0,   0.07,  -0.07,
                           0.14, -0.14, 0.12,  -0.12, 0.05, -0.05};
    const double oy[24] = {0.55, -0.04, -0.04, 0.07, -0.22, -0.22, 0.07, -0.22, -0.22,
                           0.06, -0.05, -0.05, 0.07, 0.04,  0.04,  0.07, 0.01,  0.01,
                           0,    0,     0,     0,    0,     0};
    const double oz[24] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0.07, 0.07,
                           0, 0, 0, 0, 0, 0, 0, 0, 0,  0,    0, 0};
    s.rest_offset.resize(24);
    for (int j = 0; j < 24; ++j) s.rest_offset[j] = h * Eigen::Vector3d(ox[j], oy[j], oz[j]);
    s.finalize();

    const double radius[24] = {0,     0.055, 0.055, 0.075, 0.055, 0.055, 0.080, 0.042,
                               0.042, 0.075, 0.030, 0.030, 0.040, 0.045, 0.045, 0.055,
                               0.040, 0.040, 0.035, 0.035, 0.030, 0.030, 0.025, 0.025};
    for (int j = 1; j < 24; ++j) {
        Capsule c;
        c.joint_a = s.parent[j];
        c.joint_b = j;
        c.a = s.rest_global[s.parent[j]];
        c.b = s.rest_global[j];
        if (j == 15) c.b += h * Eigen::Vector3d(0, 0.035, 0);  // head blob
        c.radius = h * radius[j] * radius_scale;
        s.capsules.push_back(c);
    }
    s.build_vertices(n_vertices, seed);
    return s;
}

Skeleton Skeleton::chain(int joints, double height, int n_vertices, uint64_t seed) {
    Skeleton s;
    s.num_joints = joints;
    s.parent.resize(joints);
    s.rest_offset.resize(joints);
    const double step = height / std::max(1, joints);
    for (int j = 0; j < joints; ++j) {
        s.parent[j] = j - 1;
        s.rest_offset[j] = j == 0 ? Eigen::Vector3d(0, 0.2 * height, 0)
                                  : Eigen::Vector3d(0, step, 0);
    }
    s.finalize();
    for (int j = 1; j < joints; ++j) {
        Capsule c;
        c.joint_a = j - 1;
        c.joint_b = j;
        c.a = s.rest_global[j - 1];
        c.b = s.rest_global[j];
        c.radius = 0.06 * height;
        s.capsules.push_back(c);
    }
    if (joints == 1) {
        Capsule c;
        c.joint_a = 0;
        c.joint_b = -1;
        c.a = s.rest_global[0];
        c.b = s.rest_global[0] + Eigen::Vector3d(0, 0.3 * height, 0);
        c.radius = 0.08 * height;
        s.capsules.push_back(c);
    }
    s.build_vertices(n_vertices, seed);
    return s;
}

Skeleton Skeleton::single_capsule(double length, double radius, int n_vertices, uint64_t seed) {
    Skeleton s;
    s.num_joints = 1;
    s.parent = {-1};
    s.rest_offset = {Eigen::Vector3d::Zero()};
    s.finalize();
    Capsule c;
    c.joint_a = 0;
    c.joint_b = -1;
    c.a = Eigen::Vector3d::Zero();
    c.b = Eigen::Vector3d(0, length, 0);
    c.radius = radius;
    s.capsules.push_back(c);
    s.build_vertices(n_vertices, seed);
    return s;
}

void fk_forward(const Skeleton& skel, std::span<const double> theta,
                std::span<const double> beta, FkCache& cache) {
    const int k = skel.num_joints;
    if (static_cast<int>(theta.size()) != skel.theta_dim())
        throw std::invalid_argument("fk_forward: theta size mismatch");
    if (static_cast<int>(beta.size()) != k)
        throw std::invalid_argument("fk_forward: beta size mismatch");
    for (double v : theta)
        if (!std::isfinite(v)) throw std::invalid_argument("fk_forward: non-finite theta");
    for (double v : beta)
        if (!std::isfinite(v) || v <= 0.0)
            throw std::invalid_argument("fk_forward: beta must be finite and positive");

    cache.local_rot.resize(k);
    cache.global_rot.resize(k);
    cache.global_trans.resize(k);
    cache.pose_trans.resize(k);
    const Eigen::Vector3d root_t(theta[3 * k], theta[3 * k + 1], theta[3 * k + 2]);
    for (int j = 0; j < k; ++j) {
        cache.local_rot[j] = so3_exp_matrix(Eigen::Vector3d(theta[3 * j], theta[3 * j + 1],
                                                            theta[3 * j + 2]));
        const Eigen::Vector3d local_t = beta[j] * skel.rest_offset[j];
        if (j == 0) {
            cache.global_rot[j] = cache.local_rot[j];
            cache.global_trans[j] = local_t + root_t;
        } else {
            const int p = skel.parent[j];
            cache.global_rot[j] = cache.global_rot[p] * cache.local_rot[j];
            cache.global_trans[j] = cache.global_rot[p] * local_t + cache.global_trans[p];
        }
        cache.pose_trans[j] = cache.global_trans[j] - cache.global_rot[j] * skel.rest_global[j];
    }
}

JointTransforms forward_kinematics(const Skeleton& skel, std::span<const double> theta,
                                   std::span<const double> beta) {
    FkCache cache;
    fk_forward(skel, theta, beta, cache);
    JointTransforms out;
    out.joints.resize(skel.num_joints);
    for (int j = 0; j < skel.num_joints; ++j) {
        out.joints[j].rotation = Rotation::from_matrix(cache.global_rot[j]);
        out.joints[j].translation = cache.pose_trans[j];
    }
    return out;
}

void fk_backward(const Skeleton& skel, std::span<const double> theta,
                 std::span<const double> beta, const FkCache& cache,
                 const std::vector<Eigen::Matrix3d>& grad_rot,
                 const std::vector<Eigen::Vector3d>& grad_trans,
                 std::span<double> grad_theta, std::span<double> grad_beta) {
    const int k = skel.num_joints;
    std::vector<Eigen::Matrix3d> d_a(k);
    std::vector<Eigen::Vector3d> d_b(k);
    for (int j = 0; j < k; ++j) {
        // pose_trans = b - A * rest_global
        d_a[j] = grad_rot[j] - grad_trans[j] * skel.rest_global[j].transpose();
        d_b[j] = grad_trans[j];
    }
    const Eigen::Vector3d root_t(theta[3 * k], theta[3 * k + 1], theta[3 * k + 2]);
    for (int j = k - 1; j >= 0; --j) {
        const Eigen::Vector3d local_t = beta[j] * skel.rest_offset[j];
        Eigen::Matrix3d parent_rot = Eigen::Matrix3d::Identity();
        if (j > 0) {
            const int p = skel.parent[j];
            parent_rot = cache.global_rot[p];
            const Eigen::Vector3d u = local_t;  // b_j = A_p u + b_p
            d_a[p] += d_a[j] * cache.local_rot[j].transpose() + d_b[j] * u.transpose();
            d_b[p] += d_b[j];
        }
        const Eigen::Matrix3d d_local_rot = parent_rot.transpose() * d_a[j];
        const Eigen::Vector3d d_u = parent_rot.transpose() * d_b[j];
        const Eigen::Vector3d aa(theta[3 * j], theta[3 * j + 1], theta[3 * j + 2]);
        const Eigen::Vector3d d_aa = so3_exp_backward(aa, d_local_rot);
        for (int a = 0; a < 3; ++a) grad_theta[3 * j + a] += d_aa[a];
        grad_beta[j] += d_u.dot(skel.rest_offset[j]);
        if (j == 0)
            for (int a = 0; a < 3; ++a) grad_theta[3 * k + a] += d_u[a];
    }
}

LbsResult lbs_deform(const GaussianSet& set, const JointTransforms& transforms) {
    if (set.kind != GaussianKind::human)
        throw std::invalid_argument("lbs_deform: set must be a human Gaussian set");
    const int k = set.num_joints;
    if (static_cast<int>(transforms.joints.size()) != k)
        throw std::invalid_argument("lbs_deform: transform count must match joint count");

    std::vector<Eigen::Matrix3d> joint_rot(k);
    std::vector<Eigen::Vector3d> joint_trans(k);
    for (int j = 0; j < k; ++j) {
        joint_rot[j] = transforms.joints[j].rotation.matrix();
        joint_trans[j] = transforms.joints[j].translation;
    }

    LbsResult out;
    out.position.resize(set.count);
    out.rotation.resize(set.count);
    out.covariance.resize(set.count);
    std::vector<double> w(k);
    for (int i = 0; i < set.count; ++i) {
        set.lbs_weights(i, w.data());
        Eigen::Vector3d p = Eigen::Vector3d::Zero();
        Eigen::Matrix3d blend = Eigen::Matrix3d::Zero();
        const Eigen::Vector3d mu = set.mu_at(i);
        for (int j = 0; j < k; ++j) {
            if (w[j] == 0.0) continue;
            p += w[j] * (joint_rot[j] * mu + joint_trans[j]);
            blend += w[j] * joint_rot[j];
        }
        out.position[i] = p;
        out.rotation[i] = blend * quat_to_matrix(set.rot_at(i));
        out.covariance[i] = build_covariance(out.rotation[i], set.scale_at(i));
    }
    return out;
}

void least_squares_scale_shift(std::span<const double> src, std::span<const double> dst,
                               double& scale, double& shift) {
    const std::size_t n = src.size();
    if (n < 2 || dst.size() != n)
        throw std::invalid_argument("least_squares_scale_shift: need matching arrays, length >= 2");
    double mean_s = 0.0, mean_d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_s += src[i];
        mean_d += dst[i];
    }
    mean_s /= n;
    mean_d /= n;
    double var = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        var += (src[i] - mean_s) * (src[i] - mean_s);
        cov += (src[i] - mean_s) * (dst[i] - mean_d);
    }
    if (var <= 0.0)
        throw std::runtime_error("least_squares_scale_shift: source values are constant");
    scale = cov / var;
    shift = mean_d - scale * mean_s;
}

ScaleShiftFit ransac_scale_shift(std::span<const double> src, std::span<const double> dst,
                                 int iterations, double tol, uint64_t seed) {
    const std::size_t n = src.size();
    if (n < 2 || dst.size() != n)
        throw std::invalid_argument("ransac_scale_shift: need matching arrays, length >= 2");
    if (tol < 0.0) {
        double lo = dst[0], hi = dst[0];
        for (double v : dst) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        tol = 0.01 * (hi - lo);
    }
    tol = std::max(tol, 1e-12);

    Rng rng(seed);
    int best_count = -1;
    double best_s = 0.0, best_b = 0.0;
    bool any_valid = false;
    for (int it = 0; it < iterations; ++it) {
        const int i = rng.uniform_int(static_cast<int>(n));
        const int j = rng.uniform_int(static_cast<int>(n));
        if (src[i] == src[j]) continue;
        any_valid = true;
        const double s = (dst[j] - dst[i]) / (src[j] - src[i]);
        const double b = dst[i] - s * src[i];
        int count = 0;
        for (std::size_t p = 0; p < n; ++p)
            if (std::abs(s * src[p] + b - dst[p]) <= tol) ++count;
        if (count > best_count) {
            best_count = count;
            best_s = s;
            best_b = b;
        }
    }
    if (!any_valid)
        throw std::runtime_error("ransac_scale_shift: all sampled hypotheses degenerate (constant source)");

    // Refit on the consensus set, then rescore with the refit model.
    std::vector<double> in_src, in_dst;
    for (std::size_t p = 0; p < n; ++p)
        if (std::abs(best_s * src[p] + best_b - dst[p]) <= tol) {
            in_src.push_back(src[p]);
            in_dst.push_back(dst[p]);
        }
    ScaleShiftFit fit;
    if (in_src.size() >= 2) {
        double var = 0.0, mean = 0.0;
        for (double v : in_src) mean += v;
        mean /= in_src.size();
        for (double v : in_src) var += (v - mean) * (v - mean);
        if (var > 0.0)
            least_squares_scale_shift(in_src, in_dst, best_s, best_b);
    }
    fit.scale = best_s;
    fit.shift = best_b;
    fit.inliers.assign(n, 0);
    fit.inlier_count = 0;
    for (std::size_t p = 0; p < n; ++p)
        if (std::abs(best_s * src[p] + best_b - dst[p]) <= tol) {
            fit.inliers[p] = 1;
            ++fit.inlier_count;
        }
    return fit;
}

std::vector<Eigen::Vector3d> posed_joint_positions(const Skeleton& skel,
                                                   std::span<const double> theta,
                                                   std::span<const double> beta) {
    FkCache cache;
    fk_forward(skel, theta, beta, cache);
    return cache.global_trans;
}

}  // namespace jgs
