#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "jgs/core_math.hpp"
#include "jgs/gaussians.hpp"

namespace jgs {

// Capsule segment in canonical space. Sampled points are skinned to
// joint_a, ramping toward joint_b near the far end when joint_b >= 0.
struct Capsule {
    int joint_a = 0;
    int joint_b = -1;
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    double radius = 0.05;
};

struct SurfaceSample {
    Eigen::Vector3d position;
    int capsule = 0;
};

// K-joint kinematic chain with a capsule body surface standing in for a
// mesh. Local rest rotations are identity, so rest-pose global rotations are
// exactly identity and the rest pose maps to identity joint transforms with
// no rounding.
struct Skeleton {
    int num_joints = 0;
    std::vector<int> parent;                    // -1 for the root
    std::vector<Eigen::Vector3d> rest_offset;   // local offset from parent
    std::vector<Eigen::Vector3d> rest_global;   // cached chained rest positions
    std::vector<Capsule> capsules;

    // canonical surface samples ("vertices") with skinning weights and albedo
    std::vector<Eigen::Vector3d> vertices;
    std::vector<double> vertex_weights;  // N_v * K, rows sum to 1
    std::vector<Eigen::Vector3d> vertex_albedo;

    void finalize();  // validates the tree and fills rest_global
    void build_vertices(int n_vertices, uint64_t seed);
    std::vector<SurfaceSample> sample_surface(int n, uint64_t seed) const;
    Eigen::Vector3d albedo_at(const Eigen::Vector3d& p, int capsule) const;

    int theta_dim() const { return 3 * num_joints + 3; }  // K axis-angles + root translation

    // SMPL-sized humanoid (24 joints) of the given height, capsule surface.
    static Skeleton humanoid(double height, int n_vertices, uint64_t seed,
                             double radius_scale = 1.0);
    // One joint, one capsule; the degenerate test body.
    static Skeleton single_capsule(double length, double radius, int n_vertices, uint64_t seed);
    // Serpentine K-joint chain for non-humanoid joint counts.
    static Skeleton chain(int joints, double height, int n_vertices, uint64_t seed);
};

// Per-frame pose: K local axis-angle rotations followed by the root
// translation, flattened to 3K+3 values. Shared shape beta scales each
// joint's local offset.
struct BodyParams {
    std::vector<std::vector<double>> theta;  // per frame, 3K+3
    std::vector<double> beta;                // K, init 1.0
};

// Rest-relative joint transforms: identity at theta = 0, beta = 1.
struct JointTransforms {
    std::vector<RigidTransform> joints;
};

// Forward-kinematics scratch kept for the backward pass.
struct FkCache {
    std::vector<Eigen::Matrix3d> local_rot;
    std::vector<Eigen::Matrix3d> global_rot;    // A_k
    std::vector<Eigen::Vector3d> global_trans;  // b_k
    std::vector<Eigen::Vector3d> pose_trans;    // b_k - A_k c_k
};

void fk_forward(const Skeleton& skel, std::span<const double> theta,
                std::span<const double> beta, FkCache& cache);

JointTransforms forward_kinematics(const Skeleton& skel, std::span<const double> theta,
                                   std::span<const double> beta);

// Reverse mode through the kinematic chain. grad_rot/grad_trans hold dL/dA_k
// and dL/d(pose_trans_k); outputs accumulate into grad_theta (3K+3) and
// grad_beta (K).
void fk_backward(const Skeleton& skel, std::span<const double> theta,
                 std::span<const double> beta, const FkCache& cache,
                 const std::vector<Eigen::Matrix3d>& grad_rot,
                 const std::vector<Eigen::Vector3d>& grad_trans,
                 std::span<double> grad_theta, std::span<double> grad_beta);

struct LbsResult {
    std::vector<Eigen::Vector3d> position;
    std::vector<Eigen::Matrix3d> rotation;    // blended matrix, not re-orthonormalized
    std::vector<Eigen::Matrix3d> covariance;  // R S S^T R^T with the blended R
};

// Standard linear blend skinning of a human Gaussian set: positions through
// the weighted joint transforms, orientations by blending rotation
// components only.
LbsResult lbs_deform(const GaussianSet& set, const JointTransforms& transforms);

struct ScaleShiftFit {
    double scale = 1.0;
    double shift = 0.0;
    std::vector<char> inliers;
    int inlier_count = 0;
};

// 2-point RANSAC for dst ~ scale*src + shift, least-squares refit on the
// inlier set. tol < 0 selects 1% of the dst range. Deterministic per seed.
ScaleShiftFit ransac_scale_shift(std::span<const double> src, std::span<const double> dst,
                                 int iterations = 256, double tol = -1.0, uint64_t seed = 0);

// Closed-form least squares for the same model (also the refit step).
void least_squares_scale_shift(std::span<const double> src, std::span<const double> dst,
                               double& scale, double& shift);

// Posed world positions of every joint (FK applied to rest positions).
std::vector<Eigen::Vector3d> posed_joint_positions(const Skeleton& skel,
                                                   std::span<const double> theta,
                                                   std::span<const double> beta);

}  // namespace jgs
