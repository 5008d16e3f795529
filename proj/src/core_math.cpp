#include "jgs/core_math.hpp"

#include <cmath>
#include <stdexcept>

namespace jgs {

namespace {

inline void check_finite3(const Eigen::Vector3d& v, const char* what) {
    if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return m;
}

}  // namespace

Rotation::Rotation(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n))
        throw std::invalid_argument("Rotation: quaternion norm must be positive and finite");
    w /= n;
    x /= n;
    y /= n;
    z /= n;
}

double Rotation::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Eigen::Matrix3d Rotation::matrix() const {
    Eigen::Matrix3d m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m;
}

Rotation Rotation::from_matrix(const Eigen::Matrix3d& m) {
    // Shepperd's method: pick the largest diagonal combination for stability.
    const double tr = m.trace();
    double qw, qx, qy, qz;
    if (tr > 0.0) {
        double s = std::sqrt(tr + 1.0) * 2.0;
        qw = 0.25 * s;
        qx = (m(2, 1) - m(1, 2)) / s;
        qy = (m(0, 2) - m(2, 0)) / s;
        qz = (m(1, 0) - m(0, 1)) / s;
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
        double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
        qw = (m(2, 1) - m(1, 2)) / s;
        qx = 0.25 * s;
        qy = (m(0, 1) + m(1, 0)) / s;
        qz = (m(0, 2) + m(2, 0)) / s;
    } else if (m(1, 1) > m(2, 2)) {
        double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
        qw = (m(0, 2) - m(2, 0)) / s;
        qx = (m(0, 1) + m(1, 0)) / s;
        qy = 0.25 * s;
        qz = (m(1, 2) + m(2, 1)) / s;
    } else {
        double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
        qw = (m(1, 0) - m(0, 1)) / s;
        qx = (m(0, 2) + m(2, 0)) / s;
        qy = (m(1, 2) + m(2, 1)) / s;
        qz = 0.25 * s;
    }
    return Rotation(qw, qx, qy, qz);
}

Rotation Rotation::operator*(const Rotation& r) const {
    return Rotation(w * r.w - x * r.x - y * r.y - z * r.z,
                    w * r.x + x * r.w + y * r.z - z * r.y,
                    w * r.y - x * r.z + y * r.w + z * r.x,
                    w * r.z + x * r.y - y * r.x + z * r.w);
}

Eigen::Vector3d Rotation::rotate(const Eigen::Vector3d& v) const {
    // q v q^-1 via the two-cross-product form.
    const Eigen::Vector3d u(x, y, z);
    const Eigen::Vector3d t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
}

double Rotation::angle_to(const Rotation& other) const {
    // relative quaternion; atan2 form stays well-conditioned near identity
    const Rotation rel = inverse() * other;
    const double vec = std::sqrt(rel.x * rel.x + rel.y * rel.y + rel.z * rel.z);
    return 2.0 * std::atan2(vec, std::abs(rel.w));
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform out;
    out.rotation = rotation.inverse();
    out.translation = -out.rotation.rotate(translation);
    return out;
}

RigidTransform se3_compose(const RigidTransform& delta, const RigidTransform& base) {
    RigidTransform out;
    out.rotation = delta.rotation * base.rotation;
    out.translation = delta.rotation.rotate(base.translation) + delta.translation;
    return out;
}

Rotation so3_exp(const Eigen::Vector3d& v) {
    check_finite3(v, "so3_exp");
    const double theta2 = v.squaredNorm();
    const double theta = std::sqrt(theta2);
    double half_sinc;  // sin(theta/2)/theta
    double c;          // cos(theta/2)
    if (theta < 1e-6) {
        half_sinc = 0.5 - theta2 / 48.0;
        c = 1.0 - theta2 / 8.0;
    } else {
        half_sinc = std::sin(0.5 * theta) / theta;
        c = std::cos(0.5 * theta);
    }
    return Rotation(c, half_sinc * v.x(), half_sinc * v.y(), half_sinc * v.z());
}

Eigen::Matrix3d so3_exp_matrix(const Eigen::Vector3d& v) {
    check_finite3(v, "so3_exp_matrix");
    const double theta2 = v.squaredNorm();
    const double theta = std::sqrt(theta2);
    double a, b;  // sin(t)/t, (1-cos(t))/t^2
    if (theta < 1e-6) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    const Eigen::Matrix3d k = skew(v);
    return Eigen::Matrix3d::Identity() + a * k + b * (k * k);
}

std::array<Eigen::Matrix3d, 3> so3_exp_matrix_jacobian(const Eigen::Vector3d& v) {
    check_finite3(v, "so3_exp_matrix_jacobian");
    const double theta2 = v.squaredNorm();
    const double theta = std::sqrt(theta2);
    double a, b;    // Rodrigues coefficients
    double da, db;  // (da/dtheta)/theta, (db/dtheta)/theta
    if (theta < 1e-4) {
        a = 1.0 - theta2 / 6.0;
        b = 0.5 - theta2 / 24.0;
        da = -1.0 / 3.0 + theta2 / 30.0;
        db = -1.0 / 12.0 + theta2 / 180.0;
    } else {
        const double s = std::sin(theta), c = std::cos(theta);
        a = s / theta;
        b = (1.0 - c) / theta2;
        da = (theta * c - s) / (theta2 * theta);
        db = (theta * s - 2.0 * (1.0 - c)) / (theta2 * theta2);
    }
    const Eigen::Matrix3d k = skew(v);
    const Eigen::Matrix3d k2 = k * k;
    std::array<Eigen::Matrix3d, 3> out;
    for (int i = 0; i < 3; ++i) {
        const Eigen::Matrix3d ei = skew(Eigen::Vector3d::Unit(i));
        out[i] = (da * v[i]) * k + a * ei + (db * v[i]) * k2 + b * (ei * k + k * ei);
    }
    return out;
}

Eigen::Vector3d so3_exp_backward(const Eigen::Vector3d& v, const Eigen::Matrix3d& g) {
    const auto jac = so3_exp_matrix_jacobian(v);
    return {g.cwiseProduct(jac[0]).sum(),
            g.cwiseProduct(jac[1]).sum(),
            g.cwiseProduct(jac[2]).sum()};
}

Eigen::Matrix3d quat_to_matrix(const Eigen::Vector4d& q_raw) {
    const double n = q_raw.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw std::invalid_argument("quat_to_matrix: raw quaternion norm must be positive");
    return Rotation(q_raw[0], q_raw[1], q_raw[2], q_raw[3]).matrix();
}

Eigen::Vector4d quat_to_matrix_backward(const Eigen::Vector4d& q_raw, const Eigen::Matrix3d& g) {
    const double n = q_raw.norm();
    const Eigen::Vector4d q = q_raw / n;
    const double w = q[0], x = q[1], y = q[2], z = q[3];

    Eigen::Matrix3d dw, dx, dy, dz;
    dw << 0, -z, y,
          z, 0, -x,
          -y, x, 0;
    dx << 0, y, z,
          y, -2 * x, -w,
          z, w, -2 * x;
    dy << -2 * y, x, w,
          x, 0, z,
          -w, z, -2 * y;
    dz << -2 * z, -w, x,
          w, -2 * z, y,
          x, y, 0;

    Eigen::Vector4d grad_unit;
    grad_unit << 2.0 * g.cwiseProduct(dw).sum(), 2.0 * g.cwiseProduct(dx).sum(),
                 2.0 * g.cwiseProduct(dy).sum(), 2.0 * g.cwiseProduct(dz).sum();
    // Through the normalization: d(q)/d(q_raw) = (I - q q^T) / |q_raw|.
    return (grad_unit - q * q.dot(grad_unit)) / n;
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    if (width < 1 || height < 1)
        throw std::invalid_argument("CameraIntrinsics: image size must be at least 1x1");
}

RigidTransform CameraState::correction_transform() const {
    RigidTransform t;
    t.rotation = so3_exp(correction.head<3>());
    t.translation = correction.tail<3>();
    return t;
}

Projection project_camera_point(const CameraIntrinsics& intr, const Eigen::Vector3d& p_cam) {
    Projection out;
    out.depth = p_cam.z();
    if (p_cam.z() <= kNearPlane) {
        out.in_front = false;
        return out;
    }
    out.in_front = true;
    out.pixel = {intr.fx * p_cam.x() / p_cam.z() + intr.cx,
                 intr.fy * p_cam.y() / p_cam.z() + intr.cy};
    return out;
}

Projection project_point(const CameraState& camera, const Eigen::Vector3d& p_world) {
    return project_camera_point(camera.intrinsics, camera.effective().apply(p_world));
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraIntrinsics& intr,
                                                const Eigen::Vector3d& p_cam) {
    const double z = p_cam.z();
    if (z <= kNearPlane)
        throw std::invalid_argument("projection_jacobian: point at or behind near plane");
    const double inv_z = 1.0 / z;
    const double inv_z2 = inv_z * inv_z;
    Eigen::Matrix<double, 2, 3> j;
    j << intr.fx * inv_z, 0.0, -intr.fx * p_cam.x() * inv_z2,
         0.0, intr.fy * inv_z, -intr.fy * p_cam.y() * inv_z2;
    return j;
}

}  // namespace jgs
