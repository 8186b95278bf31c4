#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace vlpins {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Hamilton quaternion q^u_v, rotating v-frame vectors into the u-frame.
using Quat = Eigen::Quaterniond;
/// Direction cosine matrix R^u_v.
using Dcm = Eigen::Matrix3d;

namespace attitude {

inline constexpr double kNormTolerance = 1e-6;

/// Rotation matrix of a unit quaternion. Throws InvalidQuaternion when
/// |q| deviates from one by more than kNormTolerance.
Dcm quatToDcm(const Quat& q);

/// Unit quaternion with non-negative scalar part for a proper rotation matrix.
Quat dcmToQuat(const Dcm& R);

/// Hamilton product a ⊗ b, renormalized.
Quat quatMultiply(const Quat& a, const Quat& b);

/// Local (right) perturbation: q ⊗ [1, dphi/2], renormalized.
///
/// dphi is expressed in the v-frame. The equivalent left perturbation in
/// the u-frame is R^u_v·dphi, so that
///   R(applySmallAngle(q, dphi)) ≈ (I + [R dphi ×]) R(q) = (I − [dphi_u ×]) R(q)
/// with dphi_u = −R^u_v dphi.
Quat applySmallAngle(const Quat& q, const Vec3& dphi);

Mat3 skew(const Vec3& v);

/// Exponential map from a rotation vector.
Quat expMap(const Vec3& phi);
/// Rotation vector of a unit quaternion, angle in [0, π].
Vec3 logMap(const Quat& q);

Mat3 rightJacobian(const Vec3& phi);
Mat3 rightJacobianInverse(const Vec3& phi);

/// q = Rz(yaw)·Ry(pitch)·Rx(roll).
Quat fromEuler(double roll, double pitch, double yaw);
/// (roll, pitch, yaw) of the ZYX decomposition.
Vec3 toEuler(const Quat& q);

}  // namespace attitude
}  // namespace vlpins
