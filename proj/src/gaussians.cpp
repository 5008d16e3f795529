#include "jgs/gaussians.hpp"

#include <cmath>
#include <stdexcept>

#include "jgs/body.hpp"
#include "jgs/knn.hpp"
#include "jgs/rng.hpp"

namespace jgs {

namespace {

// Weights at exactly zero map to logits low enough that softmax underflows
// them back to exactly zero (exp(-746) is below the smallest subnormal), so
// one-hot rows stay one-hot through the parameterization.
constexpr double kLogitFloor = -746.0;

double weight_logit(double w) {
    return w > 0.0 ? std::max(std::log(w), kLogitFloor) : kLogitFloor;
}

}  // namespace

void GaussianSet::lbs_weights(int i, double* out) const {
    const int k = num_joints;
    const double* l = &lbs_logit[static_cast<std::size_t>(i) * k];
    double max_logit = l[0];
    for (int j = 1; j < k; ++j) max_logit = std::max(max_logit, l[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
        out[j] = std::exp(l[j] - max_logit);
        sum += out[j];
    }
    for (int j = 0; j < k; ++j) out[j] /= sum;
}

void GaussianSet::resize(int n) {
    count = n;
    mu.assign(3 * static_cast<std::size_t>(n), 0.0);
    rot.assign(4 * static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) rot[4 * static_cast<std::size_t>(i)] = 1.0;  // identity quat
    log_scale.assign(3 * static_cast<std::size_t>(n), 0.0);
    opacity_logit.assign(n, 0.0);
    sh.assign(static_cast<std::size_t>(n) * sh_coeffs() * 3, 0.0);
    if (kind == GaussianKind::human) {
        lbs_logit.assign(static_cast<std::size_t>(n) * num_joints, 0.0);
        lbs_init.assign(static_cast<std::size_t>(n) * num_joints, 0.0);
    } else {
        lbs_logit.clear();
        lbs_init.clear();
    }
}

void GaussianSet::validate() const {
    const auto n = static_cast<std::size_t>(count);
    if (mu.size() != 3 * n || rot.size() != 4 * n || log_scale.size() != 3 * n ||
        opacity_logit.size() != n || sh.size() != n * sh_coeffs() * 3)
        throw std::runtime_error("GaussianSet: column sizes do not match count");
    if (kind == GaussianKind::human) {
        if (num_joints < 1 || lbs_logit.size() != n * num_joints ||
            lbs_init.size() != n * num_joints)
            throw std::runtime_error("GaussianSet: human set requires skinning columns");
    } else if (!lbs_logit.empty() || !lbs_init.empty()) {
        throw std::runtime_error("GaussianSet: background set must not carry skinning columns");
    }
}

Eigen::Matrix3d build_covariance(const Eigen::Matrix3d& rot, const Eigen::Vector3d& scale) {
    if (!(scale.minCoeff() > 0.0))
        throw std::invalid_argument("build_covariance: scale must be positive");
    const Eigen::Matrix3d rs = rot * scale.asDiagonal();
    return rs * rs.transpose();
}

namespace {

// 3DGS real-SH constants.
constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

}  // namespace

void sh_basis(const Eigen::Vector3d& d, int degree, double* out) {
    if (degree < 0 || degree > kMaxShDegree)
        throw std::invalid_argument("sh_basis: degree must be in [0, 3]");
    const double x = d.x(), y = d.y(), z = d.z();
    out[0] = kC0;
    if (degree < 1) return;
    out[1] = -kC1 * y;
    out[2] = kC1 * z;
    out[3] = -kC1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[4] = kC2[0] * x * y;
    out[5] = kC2[1] * y * z;
    out[6] = kC2[2] * (2.0 * zz - xx - yy);
    out[7] = kC2[3] * x * z;
    out[8] = kC2[4] * (xx - yy);
    if (degree < 3) return;
    out[9] = kC3[0] * y * (3.0 * xx - yy);
    out[10] = kC3[1] * x * y * z;
    out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    out[14] = kC3[5] * z * (xx - yy);
    out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_grad(const Eigen::Vector3d& d, int degree, Eigen::Vector3d* out) {
    const double x = d.x(), y = d.y(), z = d.z();
    out[0] = {0, 0, 0};
    if (degree < 1) return;
    out[1] = {0, -kC1, 0};
    out[2] = {0, 0, kC1};
    out[3] = {-kC1, 0, 0};
    if (degree < 2) return;
    out[4] = {kC2[0] * y, kC2[0] * x, 0};
    out[5] = {0, kC2[1] * z, kC2[1] * y};
    out[6] = {-2.0 * kC2[2] * x, -2.0 * kC2[2] * y, 4.0 * kC2[2] * z};
    out[7] = {kC2[3] * z, 0, kC2[3] * x};
    out[8] = {2.0 * kC2[4] * x, -2.0 * kC2[4] * y, 0};
    if (degree < 3) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[9] = {kC3[0] * 6.0 * x * y, kC3[0] * (3.0 * xx - 3.0 * yy), 0};
    out[10] = {kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y};
    out[11] = {-2.0 * kC3[2] * x * y, kC3[2] * (4.0 * zz - xx - 3.0 * yy), 8.0 * kC3[2] * y * z};
    out[12] = {-6.0 * kC3[3] * x * z, -6.0 * kC3[3] * y * z, kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)};
    out[13] = {kC3[4] * (4.0 * zz - 3.0 * xx - yy), -2.0 * kC3[4] * x * y, 8.0 * kC3[4] * x * z};
    out[14] = {2.0 * kC3[5] * x * z, -2.0 * kC3[5] * y * z, kC3[5] * (xx - yy)};
    out[15] = {kC3[6] * (3.0 * xx - 3.0 * yy), -6.0 * kC3[6] * x * y, 0};
}

Eigen::Vector3d eval_sh(const double* sh, int degree, const Eigen::Vector3d& view_dir) {
    double basis[16];
    sh_basis(view_dir, degree, basis);
    const int n = (degree + 1) * (degree + 1);
    Eigen::Vector3d rgb(0.5, 0.5, 0.5);
    for (int k = 0; k < n; ++k) {
        rgb.x() += basis[k] * sh[3 * k];
        rgb.y() += basis[k] * sh[3 * k + 1];
        rgb.z() += basis[k] * sh[3 * k + 2];
    }
    return rgb;
}

Eigen::Vector3d albedo_to_sh0(const Eigen::Vector3d& albedo) {
    return (albedo - Eigen::Vector3d::Constant(0.5)) / kC0;
}

GaussianSet init_human_gaussians(const Skeleton& skeleton, int count, uint64_t seed,
                                 int sh_degree, const InitDefaults& defaults) {
    if (count < 1) throw std::invalid_argument("init_human_gaussians: count must be >= 1");
    if (skeleton.vertices.empty())
        throw std::invalid_argument("init_human_gaussians: skeleton has no surface vertices");

    GaussianSet set;
    set.kind = GaussianKind::human;
    set.sh_degree = sh_degree;
    set.num_joints = skeleton.num_joints;
    set.resize(count);

    const auto samples = skeleton.sample_surface(count, seed);
    const KdTree3 vertex_tree(skeleton.vertices);

    std::vector<Eigen::Vector3d> positions(count);
    for (int i = 0; i < count; ++i) positions[i] = samples[i].position;
    const KdTree3 self_tree(positions);

    const int k = skeleton.num_joints;
    for (int i = 0; i < count; ++i) {
        set.mu_at(i) = positions[i];

        const int nearest_vertex = vertex_tree.nearest(positions[i]);
        for (int j = 0; j < k; ++j) {
            const double w = skeleton.vertex_weights[static_cast<std::size_t>(nearest_vertex) * k + j];
            set.lbs_init[static_cast<std::size_t>(i) * k + j] = w;
            set.lbs_logit[static_cast<std::size_t>(i) * k + j] = weight_logit(w);
        }

        double scale = defaults.fallback_scale;
        if (count > 1) {
            const auto nn = self_tree.k_nearest(positions[i], 1, i);
            if (!nn.empty()) scale = (positions[nn[0]] - positions[i]).norm();
        }
        scale = std::max(scale, 1e-8);
        for (int a = 0; a < 3; ++a) set.log_scale[3 * i + a] = std::log(scale);

        set.opacity_logit[i] = std::log(defaults.opacity / (1.0 - defaults.opacity));

        const Eigen::Vector3d albedo = skeleton.vertex_albedo[nearest_vertex];
        const Eigen::Vector3d sh0 = albedo_to_sh0(albedo);
        double* shp = &set.sh[static_cast<std::size_t>(i) * set.sh_coeffs() * 3];
        shp[0] = sh0.x();
        shp[1] = sh0.y();
        shp[2] = sh0.z();
    }
    return set;
}

GaussianSet init_background_gaussians(const std::vector<Eigen::Vector3d>& points,
                                      const std::vector<Eigen::Vector3d>& colors,
                                      int sh_degree, const InitDefaults& defaults) {
    if (points.empty())
        throw std::invalid_argument("init_background_gaussians: empty point cloud");
    if (colors.size() != points.size())
        throw std::invalid_argument("init_background_gaussians: point/color count mismatch");

    GaussianSet set;
    set.kind = GaussianKind::background;
    set.sh_degree = sh_degree;
    set.resize(static_cast<int>(points.size()));

    const KdTree3 tree(points);
    for (int i = 0; i < set.count; ++i) {
        set.mu_at(i) = points[i];

        double scale = defaults.fallback_scale;
        const int k = std::min<int>(3, set.count - 1);
        if (k > 0) {
            const auto nn = tree.k_nearest(points[i], k, i);
            double sum = 0.0;
            for (int j : nn) sum += (points[j] - points[i]).norm();
            scale = sum / static_cast<double>(nn.size());
        }
        scale = std::max(scale, 1e-8);
        for (int a = 0; a < 3; ++a) set.log_scale[3 * i + a] = std::log(scale);

        set.opacity_logit[i] = std::log(defaults.opacity / (1.0 - defaults.opacity));

        const Eigen::Vector3d sh0 = albedo_to_sh0(colors[i]);
        double* shp = &set.sh[static_cast<std::size_t>(i) * set.sh_coeffs() * 3];
        shp[0] = sh0.x();
        shp[1] = sh0.y();
        shp[2] = sh0.z();
    }
    return set;
}

}  // namespace jgs
