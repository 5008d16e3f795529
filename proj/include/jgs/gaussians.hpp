#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "jgs/core_math.hpp"

namespace jgs {

struct Skeleton;  // body.hpp

enum class GaussianKind { human, background };

// Columnar store of 3D Gaussians. Free parameters are kept in unconstrained
// form: scales as logs, opacity as a logit, skinning weights as logits fed
// through softmax, rotations as raw quaternions normalized on use. The
// constrained invariants (positive scale, opacity in [0,1], weights on the
// simplex) therefore hold by construction.
struct GaussianSet {
    GaussianKind kind = GaussianKind::background;
    int count = 0;
    int sh_degree = 1;
    int num_joints = 0;  // K for human sets, 0 for background

    std::vector<double> mu;             // 3N; canonical space for human, world for background
    std::vector<double> rot;            // 4N raw quaternion (w, x, y, z)
    std::vector<double> log_scale;      // 3N
    std::vector<double> opacity_logit;  // N
    std::vector<double> sh;             // N * coeffs * 3, coefficient-major per Gaussian
    std::vector<double> lbs_logit;      // N*K, human only
    std::vector<double> lbs_init;       // N*K frozen normalized weights, human only

    int sh_coeffs() const { return (sh_degree + 1) * (sh_degree + 1); }

    Eigen::Map<Eigen::Vector3d> mu_at(int i) { return Eigen::Map<Eigen::Vector3d>(&mu[3 * i]); }
    Eigen::Map<const Eigen::Vector3d> mu_at(int i) const {
        return Eigen::Map<const Eigen::Vector3d>(&mu[3 * i]);
    }
    Eigen::Map<const Eigen::Vector4d> rot_at(int i) const {
        return Eigen::Map<const Eigen::Vector4d>(&rot[4 * i]);
    }
    Eigen::Vector3d scale_at(int i) const {
        return Eigen::Vector3d(std::exp(log_scale[3 * i]), std::exp(log_scale[3 * i + 1]),
                               std::exp(log_scale[3 * i + 2]));
    }
    double opacity_at(int i) const { return 1.0 / (1.0 + std::exp(-opacity_logit[i])); }
    const double* sh_at(int i) const { return &sh[static_cast<std::size_t>(i) * sh_coeffs() * 3]; }

    // softmax of the i-th logit row into out[0..K)
    void lbs_weights(int i, double* out) const;

    void resize(int n);
    void validate() const;
};

// Sigma = R S S^T R^T. R may be any (possibly non-orthonormal) blend of
// rotation matrices; the product form keeps the result PSD regardless.
Eigen::Matrix3d build_covariance(const Eigen::Matrix3d& rot, const Eigen::Vector3d& scale);

// Real spherical harmonics basis, degrees 0..3, 3DGS coefficient convention.
inline constexpr int kMaxShDegree = 3;
void sh_basis(const Eigen::Vector3d& dir, int degree, double* out);                // coeffs values
void sh_basis_grad(const Eigen::Vector3d& dir, int degree, Eigen::Vector3d* out);  // d(basis)/d(dir)

// rgb = 0.5 + sum_k basis_k(dir) * sh_k. No clamping here; compositing and
// image encoding handle range.
Eigen::Vector3d eval_sh(const double* sh, int degree, const Eigen::Vector3d& view_dir);

struct InitDefaults {
    double opacity = 0.5;
    double fallback_scale = 0.1;  // used when neighbor distances are unavailable
};

// Gaussians sampled uniformly on the canonical body surface; skinning
// weights and albedo copied from the nearest surface vertex, isotropic scale
// from the nearest sampled neighbor, frozen initial weights kept for the
// skinning regularizer.
GaussianSet init_human_gaussians(const Skeleton& skeleton, int count, uint64_t seed,
                                 int sh_degree = 1, const InitDefaults& defaults = {});

// One Gaussian per input point; isotropic scale from the mean distance to
// the (up to) 3 nearest neighbors.
GaussianSet init_background_gaussians(const std::vector<Eigen::Vector3d>& points,
                                      const std::vector<Eigen::Vector3d>& colors,
                                      int sh_degree = 1, const InitDefaults& defaults = {});

// Inverse of the degree-0 SH shading: coefficients that make eval_sh return
// approximately `albedo` for a view-independent Gaussian.
Eigen::Vector3d albedo_to_sh0(const Eigen::Vector3d& albedo);

}  // namespace jgs
