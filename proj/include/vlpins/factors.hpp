#pragma once

#include <memory>
#include <optional>
#include <span>

#include <Eigen/Core>

#include "vlpins/channel.hpp"
#include "vlpins/nls.hpp"
#include "vlpins/preint.hpp"

namespace vlpins {

using Row15 = Eigen::Matrix<double, 1, 15>;

/// PD position p + R^u_v·R^v_b·ℓ^b.
Vec3 pdPosition(const NavState& x, const ReceiverConfig& rx);

/// predict_rss at the lever-arm-corrected position minus the measurement.
/// Empty when the prediction falls outside the FOV.
std::optional<double> vlpResidual(const NavState& x, const RssSample& sample, const LedBeacon& led,
                                  const ReceiverConfig& rx);

/// ∂(predicted RSS)/∂(15-dim error of x), right v-frame attitude perturbation.
/// Throws NearSingular at grazing geometry.
Row15 vlpJacobianRow(const NavState& x, const LedBeacon& led, const ReceiverConfig& rx);

/// Error-state direction that spins the PD about its own normal while the
/// PD centre stays put.
Vector15 headingNullDirection(const NavState& x, const ReceiverConfig& rx);

/// Σ JᵀJ/σ² over the LEDs visible from x: the information of one RSS epoch.
Matrix15 rssInformation(const NavState& x, std::span<const LedBeacon> leds, const ReceiverConfig& rx,
                        double sigma);

/// ∂(predicted RSS)/∂(LED planar position).
Eigen::RowVector2d ledJacobianRow(const NavState& x, const LedBeacon& led, const ReceiverConfig& rx);

struct ConstraintConfig {
  bool nhc_lateral = true;
  bool nhc_vertical = true;
  double nhc_sigma = 0.05;  // m/s
  bool height = false;
  double height_sigma = 0.01;  // m
  /// Height of the state origin implied by h_PD (h_PD minus the level lever arm).
  double height_target = 0.0;
  /// When false the estimator derives the target from the receiver config.
  bool height_target_set = false;
};

/// Unwhitened [height, lateral, vertical] residuals for the enabled constraints.
Eigen::VectorXd constraintResiduals(const NavState& x, const ConstraintConfig& cfg);

/// Pre-integrated IMU between two Nav blocks, whitened by Σ.
class ImuFactor : public nls::Factor {
 public:
  ImuFactor(int from, int to, std::shared_ptr<const PreintegratedImu> pre, const Vec3& gravity);
  int residualDim() const override { return 15; }
  std::string kind() const override { return "imu"; }
  Eigen::VectorXd evaluate(const std::vector<const nls::ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;
  const PreintegratedImu& preintegrated() const { return *pre_; }

 private:
  std::shared_ptr<const PreintegratedImu> pre_;
  Vec3 gravity_;
  Matrix15 sqrt_info_;
};

/// One RSS sample on a Nav block, optionally with a 2-D unknown-LED block.
/// The factor contributes nothing while the prediction is out of FOV or grazing.
class VlpFactor : public nls::Factor {
 public:
  VlpFactor(int state, std::optional<int> led_block, const LedBeacon& led, const ReceiverConfig& rx,
            double measured, double variance);
  int residualDim() const override { return 1; }
  std::string kind() const override { return "vlp"; }
  Eigen::VectorXd evaluate(const std::vector<const nls::ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  bool has_led_block_;
  LedBeacon led_;
  ReceiverConfig rx_;
  double measured_;
  double inv_sigma_;
};

class HeightFactor : public nls::Factor {
 public:
  HeightFactor(int state, double target, double sigma);
  int residualDim() const override { return 1; }
  std::string kind() const override { return "height"; }
  Eigen::VectorXd evaluate(const std::vector<const nls::ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  double target_, sigma_;
};

/// Zero lateral and/or vertical velocity in the v-frame.
class NhcFactor : public nls::Factor {
 public:
  NhcFactor(int state, bool lateral, bool vertical, double sigma);
  int residualDim() const override { return static_cast<int>(axes_.size()); }
  std::string kind() const override { return "nhc"; }
  Eigen::VectorXd evaluate(const std::vector<const nls::ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  std::vector<int> axes_;
  double sigma_;
};

/// Gaussian prior on a Nav block: r = S·(x ⊟ x̄) with S the square-root information.
class NavPriorFactor : public nls::Factor {
 public:
  NavPriorFactor(int state, const NavState& mean, const Vector15& sigmas);
  int residualDim() const override { return 15; }
  std::string kind() const override { return "nav_prior"; }
  Eigen::VectorXd evaluate(const std::vector<const nls::ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  NavState mean_;
  Vector15 inv_sigma_;
};

/// Diagonal Gaussian prior on a Euclidean block.
class EuclideanPriorFactor : public nls::Factor {
 public:
  EuclideanPriorFactor(int block, Eigen::VectorXd mean, Eigen::VectorXd sigmas);
  int residualDim() const override { return static_cast<int>(mean_.size()); }
  std::string kind() const override { return "prior"; }
  Eigen::VectorXd evaluate(const std::vector<const nls::ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  Eigen::VectorXd mean_, inv_sigma_;
};

/// PD position fix (loosely coupled), r = L⁻¹(p + R·ℓ^v − fix).
class PositionFixFactor : public nls::Factor {
 public:
  PositionFixFactor(int state, const Vec3& fix, const Mat3& covariance, const Vec3& lever_v);
  int residualDim() const override { return 3; }
  std::string kind() const override { return "position_fix"; }
  Eigen::VectorXd evaluate(const std::vector<const nls::ParameterBlock*>& x,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;

 private:
  Vec3 fix_, lever_v_;
  Mat3 whiten_;
};

}  // namespace vlpins
