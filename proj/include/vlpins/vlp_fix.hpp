#pragma once

#include <optional>
#include <span>
#include <vector>

#include "vlpins/channel.hpp"

namespace vlpins {

struct VlpFixOptions {
  bool solve_z = true;
  /// Also solves pitch and yaw of the PD (roll held at zero).
  bool solve_tilt = false;
  /// PD attitude used when the tilt is not solved.
  Quat attitude = Quat::Identity();
  /// PD height used when z is not solved.
  double fixed_z = 0.0;
  int max_iterations = 30;
};

/// Per-epoch RSS-only PD pose.
struct VlpFix {
  Vec3 position = Vec3::Zero();
  Quat attitude = Quat::Identity();
  Mat3 covariance = Mat3::Identity();
  double cost = 0.0;
  int used = 0;
};

/// Weighted nonlinear least squares on the LOS samples of one epoch. Empty
/// when fewer usable samples than unknowns remain or the solve fails.
std::optional<VlpFix> solveVlpFix(std::span<const RssSample> samples, std::span<const LedBeacon> leds,
                                  const ReceiverConfig& rx, const Vec3& initial,
                                  const VlpFixOptions& options);

/// RSS-weighted centroid of the observed LEDs at height z.
Vec3 rssCentroid(std::span<const RssSample> samples, std::span<const LedBeacon> leds, double z);

}  // namespace vlpins
