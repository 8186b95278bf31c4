#pragma once

#include <cmath>
#include <random>

#include "vlpins/attitude.hpp"
#include "vlpins/channel.hpp"

namespace vlpins::test {

inline Quat randomQuat(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

inline Vec3 randomVec(std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

/// Tilt up to max_tilt about a random horizontal axis, any heading.
inline Quat randomTiltedQuat(std::mt19937& rng, double max_tilt) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double yaw = 2.0 * M_PI * u(rng);
  const double roll = (2.0 * u(rng) - 1.0) * max_tilt / std::sqrt(2.0);
  const double pitch = (2.0 * u(rng) - 1.0) * max_tilt / std::sqrt(2.0);
  return attitude::fromEuler(roll, pitch, yaw);
}

inline LedBeacon ceilingLed(int id, const Vec3& pos, double m = 1.0) {
  LedBeacon led;
  led.id = id;
  led.position = pos;
  led.normal = Vec3::UnitZ();  // n_l·D > 0 for a PD below the LED
  led.lambertian_order = m;
  led.transmit_power = 10.0;
  return led;
}

inline double relErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Relative error of an analytic derivative against a numeric one, with a
/// floor relative to a characteristic scale so near-zero entries do not blow up.
inline double scaledErr(double analytic, double numeric, double scale) {
  return std::abs(analytic - numeric) / std::max(std::abs(numeric), scale);
}

}  // namespace vlpins::test
