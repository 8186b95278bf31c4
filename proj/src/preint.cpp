#include "vlpins/preint.hpp"

#include <cmath>
#include <string>

#include "vlpins/errors.hpp"
#include "vlpins/log.hpp"

namespace vlpins {

using attitude::skew;

PreintegratedImu::PreintegratedImu(const ImuBias& linearization_bias, const ImuNoiseDensity& noise)
    : bias_(linearization_bias), noise_(noise) {}

void PreintegratedImu::integrate(const Vec3& accel_v, const Vec3& gyro_v, double dt) {
  if (!(dt > 0.0)) throw ConfigError("pre-integration step needs dt > 0");
  const Mat3 R = gamma_.toRotationMatrix();
  const Vec3 a = accel_v - bias_.accel;
  const Vec3 w = gyro_v - bias_.gyro;
  const Vec3 phi = w * dt;
  const Quat dq = attitude::applySmallAngle(Quat::Identity(), phi);
  // Right derivative of q(φ) = normalize([1, φ/2]).
  const Vec3 u = 0.5 * phi;
  const Mat3 dq_dphi = (Mat3::Identity() + skew(u) + u * u.transpose()).inverse();
  const Mat3 Ra_hat = R * skew(a);
  const double dt2 = dt * dt;

  Matrix15 F = Matrix15::Identity();
  F.block<3, 3>(err::P, err::V) = Mat3::Identity() * dt;
  F.block<3, 3>(err::P, err::Phi) = -0.5 * Ra_hat * dt2;
  F.block<3, 3>(err::P, err::Ba) = -0.5 * R * dt2;
  F.block<3, 3>(err::V, err::Phi) = -Ra_hat * dt;
  F.block<3, 3>(err::V, err::Ba) = -R * dt;
  F.block<3, 3>(err::Phi, err::Phi) = dq.toRotationMatrix().transpose();
  F.block<3, 3>(err::Phi, err::Bg) = -dq_dphi * dt;

  const double qa = noise_.accel_noise * noise_.accel_noise;
  const double qg = noise_.gyro_noise * noise_.gyro_noise;
  Matrix15 Q = Matrix15::Zero();
  Q.block<3, 3>(err::P, err::P) = Mat3::Identity() * (0.25 * qa * dt2 * dt);
  Q.block<3, 3>(err::P, err::V) = Mat3::Identity() * (0.5 * qa * dt2);
  Q.block<3, 3>(err::V, err::P) = Mat3::Identity() * (0.5 * qa * dt2);
  Q.block<3, 3>(err::V, err::V) = Mat3::Identity() * (qa * dt);
  Q.block<3, 3>(err::Phi, err::Phi) = dq_dphi * dq_dphi.transpose() * (qg * dt);
  Q.block<3, 3>(err::Ba, err::Ba) =
      Mat3::Identity() * (noise_.accel_bias_walk * noise_.accel_bias_walk * dt);
  Q.block<3, 3>(err::Bg, err::Bg) =
      Mat3::Identity() * (noise_.gyro_bias_walk * noise_.gyro_bias_walk * dt);

  alpha_ += beta_ * dt + 0.5 * R * a * dt2;
  beta_ += R * a * dt;
  gamma_ = attitude::quatMultiply(gamma_, dq);

  jacobian_ = F * jacobian_;
  covariance_ = F * covariance_ * F.transpose() + Q;
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  dt_sum_ += dt;
  ++count_;
}

PreintegratedImu::Delta PreintegratedImu::corrected(const ImuBias& bias) const {
  const Vec3 dba = bias.accel - bias_.accel;
  const Vec3 dbg = bias.gyro - bias_.gyro;
  Delta d;
  d.alpha = alpha_ + dAlphaDba() * dba + dAlphaDbg() * dbg;
  d.beta = beta_ + dBetaDba() * dba + dBetaDbg() * dbg;
  d.gamma = attitude::quatMultiply(gamma_, attitude::expMap(dGammaDbg() * dbg));
  return d;
}

PreintegratedImu PreintegratedImu::biasCorrected(const ImuBias& new_bias) const {
  const double shift_a = (new_bias.accel - bias_.accel).norm();
  const double shift_g = (new_bias.gyro - bias_.gyro).norm();
  if (shift_a > 0.1 || shift_g > 0.05)
    log::warn("first-order bias correction far from linearization point (" +
              std::to_string(shift_a) + " m/s^2, " + std::to_string(shift_g) + " rad/s)");
  PreintegratedImu out = *this;
  const Delta d = corrected(new_bias);
  out.alpha_ = d.alpha;
  out.beta_ = d.beta;
  out.gamma_ = d.gamma;
  out.bias_ = new_bias;
  return out;
}

PreintegratedImu preintegrate(std::span<const ImuSample> samples, double t_end,
                              const ImuBias& bias, const Dcm& R_b_to_v,
                              const ImuNoiseDensity& noise) {
  if (samples.empty()) throw ConfigError("pre-integration needs at least one IMU sample");
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (!(samples[i].timestamp > samples[i - 1].timestamp))
      throw ConfigError("IMU timestamps must be strictly increasing");
  if (!(t_end > samples.back().timestamp - 1e-12))
    throw ConfigError("pre-integration end precedes the last IMU sample");

  PreintegratedImu pre(bias, noise);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t_next = i + 1 < samples.size() ? samples[i + 1].timestamp : t_end;
    const double dt = t_next - samples[i].timestamp;
    if (dt <= 1e-12) continue;
    pre.integrate(R_b_to_v * samples[i].accel, R_b_to_v * samples[i].gyro, dt);
  }
  return pre;
}

Vector15 imuResidual(const PreintegratedImu& pre, const NavState& xk, const NavState& xk1,
                     const Vec3& gravity, ImuResidualJacobians* jacobians) {
  const double dt = pre.deltaTime();
  const ImuBias bias_k{xk.ba, xk.bg};
  const auto d = pre.corrected(bias_k);
  const Mat3 Rk = xk.q.toRotationMatrix();
  const Mat3 RkT = Rk.transpose();

  const Vec3 dp = xk1.p - xk.p - xk.v * dt - 0.5 * gravity * dt * dt;
  const Vec3 dv = xk1.v - xk.v - gravity * dt;
  const Quat E = xk.q.conjugate() * xk1.q * d.gamma.conjugate();

  Vector15 r;
  r.segment<3>(err::P) = RkT * dp - d.alpha;
  r.segment<3>(err::V) = RkT * dv - d.beta;
  r.segment<3>(err::Phi) = 2.0 * E.vec();
  r.segment<3>(err::Ba) = xk1.ba - xk.ba;
  r.segment<3>(err::Bg) = xk1.bg - xk.bg;

  if (jacobians) {
    const Mat3 I = Mat3::Identity();
    const Mat3 right = E.w() * I + skew(E.vec());
    const Mat3 left = E.w() * I - skew(E.vec());
    const Vec3 dbg = xk.bg - pre.bias().gyro;
    const Mat3 Rg = d.gamma.toRotationMatrix();

    Matrix15& A = jacobians->d_xk;
    A.setZero();
    A.block<3, 3>(err::P, err::P) = -RkT;
    A.block<3, 3>(err::P, err::V) = -RkT * dt;
    A.block<3, 3>(err::P, err::Phi) = skew(RkT * dp);
    A.block<3, 3>(err::P, err::Ba) = -pre.dAlphaDba();
    A.block<3, 3>(err::P, err::Bg) = -pre.dAlphaDbg();
    A.block<3, 3>(err::V, err::V) = -RkT;
    A.block<3, 3>(err::V, err::Phi) = skew(RkT * dv);
    A.block<3, 3>(err::V, err::Ba) = -pre.dBetaDba();
    A.block<3, 3>(err::V, err::Bg) = -pre.dBetaDbg();
    A.block<3, 3>(err::Phi, err::Phi) = -left;
    A.block<3, 3>(err::Phi, err::Bg) =
        -right * Rg * attitude::rightJacobian(pre.dGammaDbg() * dbg) * pre.dGammaDbg();
    A.block<3, 3>(err::Ba, err::Ba) = -I;
    A.block<3, 3>(err::Bg, err::Bg) = -I;

    Matrix15& B = jacobians->d_xk1;
    B.setZero();
    B.block<3, 3>(err::P, err::P) = RkT;
    B.block<3, 3>(err::V, err::V) = RkT;
    B.block<3, 3>(err::Phi, err::Phi) = right * Rg;
    B.block<3, 3>(err::Ba, err::Ba) = I;
    B.block<3, 3>(err::Bg, err::Bg) = I;
  }
  return r;
}

NavState propagate(const PreintegratedImu& pre, const NavState& xk, const Vec3& gravity) {
  const double dt = pre.deltaTime();
  const auto d = pre.corrected({xk.ba, xk.bg});
  const Mat3 Rk = xk.q.toRotationMatrix();
  NavState x = xk;
  x.timestamp = xk.timestamp + dt;
  x.p = xk.p + xk.v * dt + 0.5 * gravity * dt * dt + Rk * d.alpha;
  x.v = xk.v + gravity * dt + Rk * d.beta;
  x.q = attitude::quatMultiply(xk.q, d.gamma);
  return x;
}

}  // namespace vlpins
