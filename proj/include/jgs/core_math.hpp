#pragma once

#include <Eigen/Dense>
#include <array>

namespace jgs {

// Unit quaternion. Every constructor and composition renormalizes, so the
// unit-norm invariant holds to ~1e-16 at all times.
struct Rotation {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Rotation() = default;
    Rotation(double w_, double x_, double y_, double z_);

    static Rotation identity() { return {}; }
    static Rotation from_matrix(const Eigen::Matrix3d& m);

    Eigen::Matrix3d matrix() const;
    Rotation inverse() const { return {w, -x, -y, -z}; }
    Rotation operator*(const Rotation& rhs) const;
    Eigen::Vector3d rotate(const Eigen::Vector3d& v) const;
    Eigen::Vector4d coeffs() const { return {w, x, y, z}; }
    double norm() const;
    double angle_to(const Rotation& other) const;  // radians
};

struct RigidTransform {
    Rotation rotation;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation.rotate(p) + translation;
    }
    RigidTransform inverse() const;
};

// delta o base: rotation composed, translation = R_delta * t_base + t_delta.
RigidTransform se3_compose(const RigidTransform& delta, const RigidTransform& base);

// Exponential map, quaternion form. Taylor branch below 1e-6 rad.
Rotation so3_exp(const Eigen::Vector3d& axis_angle);
Eigen::Matrix3d so3_exp_matrix(const Eigen::Vector3d& axis_angle);

// Partial derivatives dR/d(omega_i) of the Rodrigues map, i = 0,1,2.
std::array<Eigen::Matrix3d, 3> so3_exp_matrix_jacobian(const Eigen::Vector3d& axis_angle);

// Reverse-mode helper: dL/domega from dL/dR evaluated at omega.
Eigen::Vector3d so3_exp_backward(const Eigen::Vector3d& axis_angle,
                                 const Eigen::Matrix3d& grad_rotation);

// Rotation matrix from a raw (unnormalized) quaternion parameter vector
// (w, x, y, z) and its reverse-mode derivative. This is the optimization
// parameterization for per-Gaussian canonical rotations.
Eigen::Matrix3d quat_to_matrix(const Eigen::Vector4d& q_raw);
Eigen::Vector4d quat_to_matrix_backward(const Eigen::Vector4d& q_raw,
                                        const Eigen::Matrix3d& grad_rotation);

struct CameraIntrinsics {
    double fx = 1.0, fy = 1.0;   // pixels
    double cx = 0.0, cy = 0.0;   // pixels
    int width = 1, height = 1;   // pixels

    void validate() const;
};

inline constexpr double kNearPlane = 1e-4;

// Pinhole camera with a world->camera base pose and a learnable 6-dof
// correction (axis-angle in [0..3), translation in [3..6)). The effective
// pose is correction o base.
struct CameraState {
    CameraIntrinsics intrinsics;
    RigidTransform base;
    Eigen::Matrix<double, 6, 1> correction = Eigen::Matrix<double, 6, 1>::Zero();

    RigidTransform correction_transform() const;
    RigidTransform effective() const { return se3_compose(correction_transform(), base); }
};

struct Projection {
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
    double depth = 0.0;
    bool in_front = false;  // false: behind-camera signal, caller culls
};

Projection project_point(const CameraState& camera, const Eigen::Vector3d& p_world);
Projection project_camera_point(const CameraIntrinsics& intr, const Eigen::Vector3d& p_cam);

// d(pixel)/d(p_cam), 2x3. Throws if depth <= near plane.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& intr,
                                                const Eigen::Vector3d& p_cam);

}  // namespace jgs
