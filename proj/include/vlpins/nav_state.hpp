#pragma once

#include <Eigen/Core>

#include "vlpins/attitude.hpp"

namespace vlpins {

using Vector15 = Eigen::Matrix<double, 15, 1>;
using Matrix15 = Eigen::Matrix<double, 15, 15>;

/// Error-state layout shared by NavState, pre-integration and the factors.
namespace err {
inline constexpr int P = 0;
inline constexpr int V = 3;
inline constexpr int Phi = 6;
inline constexpr int Ba = 9;
inline constexpr int Bg = 12;
inline constexpr int Dim = 15;
}  // namespace err

/// Vehicle state at one epoch: 16 stored values, 15 error dimensions.
/// Biases are expressed in the v-frame (C^v_b applied to the b-frame biases).
struct NavState {
  double timestamp = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 ba = Vec3::Zero();
  Vec3 bg = Vec3::Zero();

  static constexpr int kStoredDim = 16;

  /// Stored order: p, v, q (w, x, y, z), ba, bg.
  void toArray(double* out) const;
  static NavState fromArray(const double* in, double timestamp = 0.0);
};

/// x ⊞ δ. The attitude takes the right (v-frame) small-angle update
/// q ⊗ [1, δφ/2], normalized.
NavState boxPlus(const NavState& x, const Vector15& delta);
/// y ⊟ x, the exact inverse of boxPlus: x ⊞ (y ⊟ x) = y.
Vector15 boxMinus(const NavState& y, const NavState& x);
/// ∂((x ⊞ δ) ⊟ x0)/∂δ at δ = 0.
Matrix15 boxMinusJacobian(const NavState& x, const NavState& x0);

}  // namespace vlpins
