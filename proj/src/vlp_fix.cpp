#include "vlpins/vlp_fix.hpp"

#include <cmath>

#include <Eigen/Cholesky>

namespace vlpins {

namespace {

struct Param {
  Vec3 p;
  double pitch = 0.0;
  double yaw = 0.0;
};

Quat tiltQuat(double pitch, double yaw) { return attitude::fromEuler(0.0, pitch, yaw); }

}  // namespace

Vec3 rssCentroid(std::span<const RssSample> samples, std::span<const LedBeacon> leds, double z) {
  Vec2 acc = Vec2::Zero();
  double w = 0.0;
  for (const auto& s : samples) {
    const LedBeacon* led = findLed(leds, s.led_id);
    if (!led || s.flag != RssFlag::Los || !(s.value > 0.0)) continue;
    acc += s.value * led->position.head<2>();
    w += s.value;
  }
  if (w <= 0.0) return {0.0, 0.0, z};
  return {acc.x() / w, acc.y() / w, z};
}

std::optional<VlpFix> solveVlpFix(std::span<const RssSample> samples, std::span<const LedBeacon> leds,
                                  const ReceiverConfig& rx, const Vec3& initial,
                                  const VlpFixOptions& opt) {
  std::vector<std::pair<const LedBeacon*, const RssSample*>> used;
  for (const auto& s : samples) {
    const LedBeacon* led = findLed(leds, s.led_id);
    if (led && s.flag == RssFlag::Los && s.variance > 0.0) used.emplace_back(led, &s);
  }
  const int n_params = 2 + (opt.solve_z ? 1 : 0) + (opt.solve_tilt ? 2 : 0);
  if (static_cast<int>(used.size()) < n_params) return std::nullopt;

  const auto unpack = [&](const Eigen::VectorXd& x) {
    Param p;
    p.p = Vec3(x[0], x[1], opt.solve_z ? x[2] : opt.fixed_z);
    if (opt.solve_tilt) {
      p.pitch = x[n_params - 2];
      p.yaw = x[n_params - 1];
    }
    return p;
  };
  const auto residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const Param p = unpack(x);
    const Quat q = opt.solve_tilt ? tiltQuat(p.pitch, p.yaw) : opt.attitude;
    r.resize(static_cast<Eigen::Index>(used.size()));
    for (std::size_t i = 0; i < used.size(); ++i) {
      const auto& [led, s] = used[i];
      double pred = 0.0;
      try {
        const auto g = channel::losGeometry(p.p, q, *led);
        if (g.cos_psi > 0.0 && g.cos_theta > 0.0) pred = channel::rssUnchecked(g, *led, rx);
      } catch (const std::exception&) {
        return false;
      }
      r[i] = (pred - s->value) / std::sqrt(s->variance);
    }
    return r.allFinite();
  };

  Eigen::VectorXd x(n_params);
  x[0] = initial.x();
  x[1] = initial.y();
  if (opt.solve_z) x[2] = initial.z();
  if (opt.solve_tilt) {
    x[n_params - 2] = 0.0;
    x[n_params - 1] = 0.0;
  }

  Eigen::VectorXd r;
  if (!residuals(x, r)) return std::nullopt;
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  Eigen::MatrixXd J(r.size(), n_params);
  const auto jacobian = [&](const Eigen::VectorXd& x0) {
    Eigen::VectorXd rp, rm;
    for (int k = 0; k < n_params; ++k) {
      const double h = k < 3 ? 1e-6 : 1e-7;
      Eigen::VectorXd xp = x0, xm = x0;
      xp[k] += h;
      xm[k] -= h;
      if (!residuals(xp, rp) || !residuals(xm, rm)) return false;
      J.col(k) = (rp - rm) / (2.0 * h);
    }
    return true;
  };

  for (int it = 0; it < opt.max_iterations; ++it) {
    if (!jacobian(x)) return std::nullopt;
    const Eigen::MatrixXd H = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool accepted = false;
    for (int tries = 0; tries < 20 && !accepted; ++tries) {
      Eigen::MatrixXd A = H;
      A.diagonal() += lambda * H.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd dx = A.ldlt().solve(-g);
      Eigen::VectorXd xn = x + dx;
      Eigen::VectorXd rn;
      if (dx.allFinite() && residuals(xn, rn) && rn.squaredNorm() <= cost) {
        const double decrease = cost - rn.squaredNorm();
        x = xn;
        r = rn;
        cost = r.squaredNorm();
        lambda = std::max(lambda / 3.0, 1e-9);
        accepted = true;
        if (dx.norm() < 1e-9 || decrease < 1e-12 * std::max(cost, 1e-300)) it = opt.max_iterations;
      } else {
        lambda *= 5.0;
      }
    }
    if (!accepted) break;
  }

  if (!jacobian(x)) return std::nullopt;
  const Eigen::MatrixXd H = J.transpose() * J;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(n_params, n_params));
  const Param p = unpack(x);
  VlpFix fix;
  fix.position = p.p;
  fix.attitude = opt.solve_tilt ? tiltQuat(p.pitch, p.yaw) : opt.attitude;
  fix.cost = cost;
  fix.used = static_cast<int>(used.size());
  // Residual scatter inflates the covariance when the model does not fit.
  const int dof = fix.used - n_params;
  const double scale = dof > 0 ? std::max(1.0, cost / dof) : 1.0;
  fix.covariance = Mat3::Identity() * 1e-4;
  const int pd = opt.solve_z ? 3 : 2;
  // A singular information matrix leaves the position unconstrained.
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !cov.allFinite()) return std::nullopt;
  fix.covariance.topLeftCorner(pd, pd) = scale * cov.topLeftCorner(pd, pd);
  if (fix.covariance.llt().info() != Eigen::Success || !fix.position.allFinite()) return std::nullopt;
  return fix;
}

}  // namespace vlpins
