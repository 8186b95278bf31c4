#include "vlpins/factors.hpp"

#include <Eigen/Cholesky>

#include "vlpins/errors.hpp"

namespace vlpins {

using attitude::skew;

Vec3 pdPosition(const NavState& x, const ReceiverConfig& rx) {
  return x.p + attitude::quatToDcm(x.q) * rx.leverArmV();
}

std::optional<double> vlpResidual(const NavState& x, const RssSample& sample, const LedBeacon& led,
                                  const ReceiverConfig& rx) {
  const auto predicted = channel::predictRss(pdPosition(x, rx), x.q, led, rx);
  if (!predicted) return std::nullopt;
  return *predicted - sample.value;
}

Row15 vlpJacobianRow(const NavState& x, const LedBeacon& led, const ReceiverConfig& rx) {
  const Mat3 R = attitude::quatToDcm(x.q);
  const auto J = channel::rssJacobian(pdPosition(x, rx), x.q, led, rx);
  Row15 row = Row15::Zero();
  row.segment<3>(err::P) = J.d_position.transpose();
  // R' = R(I + [δφ×]) is the u-frame disturbance −R·δφ; the lever arm moves by −R[ℓ×]δφ.
  row.segment<3>(err::Phi) =
      -J.d_attitude_u.transpose() * R - J.d_position.transpose() * R * skew(rx.leverArmV());
  return row;
}

Vector15 headingNullDirection(const NavState& x, const ReceiverConfig& rx) {
  Vector15 v = Vector15::Zero();
  v.segment<3>(err::Phi) = Vec3::UnitZ();
  v.segment<3>(err::P) = attitude::quatToDcm(x.q) * skew(rx.leverArmV()) * Vec3::UnitZ();
  return v;
}

Matrix15 rssInformation(const NavState& x, std::span<const LedBeacon> leds, const ReceiverConfig& rx,
                        double sigma) {
  Matrix15 H = Matrix15::Zero();
  const Vec3 pd = pdPosition(x, rx);
  for (const auto& led : leds) {
    if (!channel::predictRss(pd, x.q, led, rx)) continue;
    const Row15 J = vlpJacobianRow(x, led, rx);
    H += J.transpose() * J / (sigma * sigma);
  }
  return H;
}

Eigen::RowVector2d ledJacobianRow(const NavState& x, const LedBeacon& led, const ReceiverConfig& rx) {
  return -channel::rssJacobian2d(pdPosition(x, rx), x.q, led, rx).d_planar.transpose();
}

Eigen::VectorXd constraintResiduals(const NavState& x, const ConstraintConfig& cfg) {
  std::vector<double> r;
  if (cfg.height) r.push_back(x.p.z() - cfg.height_target);
  const Vec3 v_v = attitude::quatToDcm(x.q).transpose() * x.v;
  if (cfg.nhc_lateral) r.push_back(v_v.y());
  if (cfg.nhc_vertical) r.push_back(v_v.z());
  return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
}

ImuFactor::ImuFactor(int from, int to, std::shared_ptr<const PreintegratedImu> pre, const Vec3& gravity)
    : Factor({from, to}), pre_(std::move(pre)), gravity_(gravity) {
  Eigen::LLT<Matrix15> llt(pre_->covariance());
  if (llt.info() != Eigen::Success)
    throw ConfigError("pre-integration covariance is singular; check IMU noise densities");
  sqrt_info_ = llt.matrixL().solve(Matrix15::Identity());
}

Eigen::VectorXd ImuFactor::evaluate(const std::vector<const nls::ParameterBlock*>& x,
                                    std::vector<Eigen::MatrixXd>* jacobians) const {
  ImuResidualJacobians J;
  const Vector15 r = imuResidual(*pre_, x[0]->nav(), x[1]->nav(), gravity_, jacobians ? &J : nullptr);
  if (jacobians) {
    jacobians->resize(2);
    (*jacobians)[0] = sqrt_info_ * J.d_xk;
    (*jacobians)[1] = sqrt_info_ * J.d_xk1;
  }
  return sqrt_info_ * r;
}

namespace {
std::vector<int> vlpBlocks(int state, std::optional<int> led_block) {
  if (led_block) return {state, *led_block};
  return {state};
}
}  // namespace

VlpFactor::VlpFactor(int state, std::optional<int> led_block, const LedBeacon& led,
                     const ReceiverConfig& rx, double measured, double variance)
    : Factor(vlpBlocks(state, led_block)),
      has_led_block_(led_block.has_value()),
      led_(led),
      rx_(rx),
      measured_(measured) {
  if (!(variance > 0.0)) throw ConfigError("RSS variance must be positive");
  inv_sigma_ = 1.0 / std::sqrt(variance);
}

Eigen::VectorXd VlpFactor::evaluate(const std::vector<const nls::ParameterBlock*>& x,
                                    std::vector<Eigen::MatrixXd>* jacobians) const {
  const NavState s = x[0]->nav();
  LedBeacon led = led_;
  if (has_led_block_) led.position.head<2>() = x[1]->value;
  Eigen::VectorXd r = Eigen::VectorXd::Zero(1);
  if (jacobians) {
    jacobians->assign(x.size(), Eigen::MatrixXd());
    (*jacobians)[0] = Eigen::MatrixXd::Zero(1, 15);
    if (has_led_block_) (*jacobians)[1] = Eigen::MatrixXd::Zero(1, 2);
  }
  const auto res = vlpResidual(s, {s.timestamp, led.id, measured_, 1.0, RssFlag::Los}, led, rx_);
  if (!res) return r;
  if (jacobians) {
    try {
      (*jacobians)[0] = inv_sigma_ * vlpJacobianRow(s, led, rx_);
      if (has_led_block_) (*jacobians)[1] = inv_sigma_ * ledJacobianRow(s, led, rx_);
    } catch (const NearSingular&) {
      (*jacobians)[0].setZero();
      if (has_led_block_) (*jacobians)[1].setZero();
      return r;
    }
  }
  r[0] = inv_sigma_ * *res;
  return r;
}

HeightFactor::HeightFactor(int state, double target, double sigma)
    : Factor({state}), target_(target), sigma_(sigma) {
  if (!(sigma > 0.0)) throw ConfigError("height constraint sigma must be positive");
}

Eigen::VectorXd HeightFactor::evaluate(const std::vector<const nls::ParameterBlock*>& x,
                                       std::vector<Eigen::MatrixXd>* jacobians) const {
  const NavState s = x[0]->nav();
  if (jacobians) {
    jacobians->assign(1, Eigen::MatrixXd::Zero(1, 15));
    (*jacobians)[0](0, err::P + 2) = 1.0 / sigma_;
  }
  return Eigen::VectorXd::Constant(1, (s.p.z() - target_) / sigma_);
}

NhcFactor::NhcFactor(int state, bool lateral, bool vertical, double sigma)
    : Factor({state}), sigma_(sigma) {
  if (!(sigma > 0.0)) throw ConfigError("NHC sigma must be positive");
  if (lateral) axes_.push_back(1);
  if (vertical) axes_.push_back(2);
}

Eigen::VectorXd NhcFactor::evaluate(const std::vector<const nls::ParameterBlock*>& x,
                                    std::vector<Eigen::MatrixXd>* jacobians) const {
  const NavState s = x[0]->nav();
  const Mat3 Rt = attitude::quatToDcm(s.q).transpose();
  const Vec3 v_v = Rt * s.v;
  const int n = residualDim();
  Eigen::VectorXd r(n);
  if (jacobians) jacobians->assign(1, Eigen::MatrixXd::Zero(n, 15));
  for (int i = 0; i < n; ++i) {
    const int a = axes_[i];
    r[i] = v_v[a] / sigma_;
    if (jacobians) {
      (*jacobians)[0].block<1, 3>(i, err::V) = Rt.row(a) / sigma_;
      (*jacobians)[0].block<1, 3>(i, err::Phi) = skew(v_v).row(a) / sigma_;
    }
  }
  return r;
}

NavPriorFactor::NavPriorFactor(int state, const NavState& mean, const Vector15& sigmas)
    : Factor({state}), mean_(mean) {
  if (!(sigmas.array() > 0.0).all()) throw ConfigError("prior sigmas must be positive");
  inv_sigma_ = sigmas.cwiseInverse();
}

Eigen::VectorXd NavPriorFactor::evaluate(const std::vector<const nls::ParameterBlock*>& x,
                                         std::vector<Eigen::MatrixXd>* jacobians) const {
  const NavState s = x[0]->nav();
  if (jacobians) jacobians->assign(1, inv_sigma_.asDiagonal() * boxMinusJacobian(s, mean_));
  return inv_sigma_.asDiagonal() * boxMinus(s, mean_);
}

EuclideanPriorFactor::EuclideanPriorFactor(int block, Eigen::VectorXd mean, Eigen::VectorXd sigmas)
    : Factor({block}), mean_(std::move(mean)) {
  if (sigmas.size() != mean_.size() || !(sigmas.array() > 0.0).all())
    throw ConfigError("prior sigmas must be positive and match the mean");
  inv_sigma_ = sigmas.cwiseInverse();
}

Eigen::VectorXd EuclideanPriorFactor::evaluate(const std::vector<const nls::ParameterBlock*>& x,
                                               std::vector<Eigen::MatrixXd>* jacobians) const {
  if (jacobians) jacobians->assign(1, Eigen::MatrixXd(inv_sigma_.asDiagonal()));
  return inv_sigma_.asDiagonal() * (x[0]->value - mean_);
}

PositionFixFactor::PositionFixFactor(int state, const Vec3& fix, const Mat3& covariance,
                                     const Vec3& lever_v)
    : Factor({state}), fix_(fix), lever_v_(lever_v) {
  Eigen::LLT<Mat3> llt(covariance);
  if (llt.info() != Eigen::Success) throw ConfigError("position fix covariance is not positive definite");
  whiten_ = llt.matrixL().solve(Mat3::Identity());
}

Eigen::VectorXd PositionFixFactor::evaluate(const std::vector<const nls::ParameterBlock*>& x,
                                            std::vector<Eigen::MatrixXd>* jacobians) const {
  const NavState s = x[0]->nav();
  const Mat3 R = attitude::quatToDcm(s.q);
  if (jacobians) {
    jacobians->assign(1, Eigen::MatrixXd::Zero(3, 15));
    (*jacobians)[0].block<3, 3>(0, err::P) = whiten_;
    (*jacobians)[0].block<3, 3>(0, err::Phi) = -whiten_ * R * skew(lever_v_);
  }
  return whiten_ * (s.p + R * lever_v_ - fix_);
}

}  // namespace vlpins
