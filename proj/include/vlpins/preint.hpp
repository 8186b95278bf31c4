#pragma once

#include <span>

#include "vlpins/nav_state.hpp"

namespace vlpins {

/// Body-frame IMU sample. Holds over [timestamp, next timestamp).
struct ImuSample {
  double timestamp = 0.0;
  Vec3 accel = Vec3::Zero();  // m/s^2, specific force
  Vec3 gyro = Vec3::Zero();   // rad/s
};

/// v-frame IMU biases.
struct ImuBias {
  Vec3 accel = Vec3::Zero();
  Vec3 gyro = Vec3::Zero();
};

/// Continuous-time noise densities.
struct ImuNoiseDensity {
  double accel_noise = 1e-3;      // m/s^2/sqrt(Hz)
  double gyro_noise = 1e-4;       // rad/s/sqrt(Hz)
  double accel_bias_walk = 1e-5;  // m/s^3/sqrt(Hz)
  double gyro_bias_walk = 1e-6;   // rad/s^2/sqrt(Hz)
};

inline const Vec3 kDefaultGravity{0.0, 0.0, -9.80665};

/// Relative-motion pseudo-measurement between two epochs, in the v-frame of
/// the first epoch. Error order: δα, δβ, δθ, δb_a, δb_g.
class PreintegratedImu {
 public:
  PreintegratedImu(const ImuBias& linearization_bias, const ImuNoiseDensity& noise);

  /// One first-order step with a v-frame sample held for dt.
  void integrate(const Vec3& accel_v, const Vec3& gyro_v, double dt);

  const Vec3& alpha() const { return alpha_; }
  const Vec3& beta() const { return beta_; }
  const Quat& gamma() const { return gamma_; }
  const Matrix15& covariance() const { return covariance_; }
  /// ∂(state error at the end)/∂(state error at the start); bias columns
  /// hold the first-order bias Jacobians.
  const Matrix15& jacobian() const { return jacobian_; }
  const ImuBias& bias() const { return bias_; }
  const ImuNoiseDensity& noise() const { return noise_; }
  double deltaTime() const { return dt_sum_; }
  int sampleCount() const { return count_; }

  Mat3 dAlphaDba() const { return jacobian_.block<3, 3>(err::P, err::Ba); }
  Mat3 dAlphaDbg() const { return jacobian_.block<3, 3>(err::P, err::Bg); }
  Mat3 dBetaDba() const { return jacobian_.block<3, 3>(err::V, err::Ba); }
  Mat3 dBetaDbg() const { return jacobian_.block<3, 3>(err::V, err::Bg); }
  Mat3 dGammaDbg() const { return jacobian_.block<3, 3>(err::Phi, err::Bg); }

  struct Delta {
    Vec3 alpha;
    Vec3 beta;
    Quat gamma;
  };
  /// α, β, γ re-linearized at a new bias by the stored Jacobians.
  Delta corrected(const ImuBias& bias) const;

  /// Copy whose α, β, γ and linearization point move to new_bias. Warns when
  /// the shift exceeds 0.1 m/s^2 or 0.05 rad/s.
  PreintegratedImu biasCorrected(const ImuBias& new_bias) const;

 private:
  ImuBias bias_;
  ImuNoiseDensity noise_;
  Vec3 alpha_ = Vec3::Zero();
  Vec3 beta_ = Vec3::Zero();
  Quat gamma_ = Quat::Identity();
  Matrix15 covariance_ = Matrix15::Zero();
  Matrix15 jacobian_ = Matrix15::Identity();
  double dt_sum_ = 0.0;
  int count_ = 0;
};

/// Integrates samples over [samples.front().timestamp, t_end]. Each sample is
/// rotated into the v-frame by R_b_to_v and held until the next sample (the
/// last one until t_end). Throws ConfigError on an empty stream, on
/// non-increasing timestamps or when t_end precedes the last sample.
PreintegratedImu preintegrate(std::span<const ImuSample> samples, double t_end,
                              const ImuBias& bias, const Dcm& R_b_to_v,
                              const ImuNoiseDensity& noise);

struct ImuResidualJacobians {
  Matrix15 d_xk;   // ∂r/∂(error state of x_k)
  Matrix15 d_xk1;  // ∂r/∂(error state of x_k+1)
};

/// Pre-integration residual [δα, δβ, δθ, δb_a, δb_g] (unwhitened). gravity is
/// the gravitational acceleration in the u-frame, e.g. [0, 0, −9.80665] for z-up.
Vector15 imuResidual(const PreintegratedImu& pre, const NavState& xk, const NavState& xk1,
                     const Vec3& gravity, ImuResidualJacobians* jacobians = nullptr);

/// Predicts x_k+1 from x_k and the (bias-corrected) pre-integration.
NavState propagate(const PreintegratedImu& pre, const NavState& xk, const Vec3& gravity);

}  // namespace vlpins
