#include "vlpins/attitude.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vlpins/errors.hpp"

namespace vlpins::attitude {

Dcm quatToDcm(const Quat& q) {
  const double norm = q.norm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance) {
    throw InvalidQuaternion("quaternion norm " + std::to_string(norm) + " is not unit");
  }
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Dcm R;
  R << w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return R;
}

Quat dcmToQuat(const Dcm& R) {
  Quat q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

Quat quatMultiply(const Quat& a, const Quat& b) {
  Quat c = a * b;
  c.normalize();
  return c;
}

Quat applySmallAngle(const Quat& q, const Vec3& dphi) {
  const Quat dq(1.0, 0.5 * dphi.x(), 0.5 * dphi.y(), 0.5 * dphi.z());
  Quat out = q * dq;
  out.normalize();
  return out;
}

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return S;
}

Quat expMap(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z());
    return q.normalized();
  }
  const double half = 0.5 * angle;
  const Vec3 axis = phi / angle;
  return Quat(std::cos(half), std::sin(half) * axis.x(), std::sin(half) * axis.y(),
              std::sin(half) * axis.z());
}

Vec3 logMap(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v / q.w();
  const double angle = 2.0 * std::atan2(s, q.w());
  return angle * v / s;
}

Mat3 rightJacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < 1e-8) return Mat3::Identity() - 0.5 * K;
  const double t2 = theta * theta;
  return Mat3::Identity() - (1.0 - std::cos(theta)) / t2 * K +
         (theta - std::sin(theta)) / (t2 * theta) * K * K;
}

Mat3 rightJacobianInverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < 1e-8) return Mat3::Identity() + 0.5 * K;
  const double t2 = theta * theta;
  return Mat3::Identity() + 0.5 * K +
         (1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta))) * K * K;
}

Quat fromEuler(double roll, double pitch, double yaw) {
  const Quat q = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())) *
                 Quat(Eigen::AngleAxisd(pitch, Vec3::UnitY())) *
                 Quat(Eigen::AngleAxisd(roll, Vec3::UnitX()));
  return q.normalized();
}

Vec3 toEuler(const Quat& q) {
  const Dcm R = q.normalized().toRotationMatrix();
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return {roll, pitch, yaw};
}

}  // namespace vlpins::attitude
