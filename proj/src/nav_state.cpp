#include "vlpins/nav_state.hpp"

namespace vlpins {

namespace {
// Inverse of q ⊗ [1, φ/2]: φ = 2·vec(E)/w(E) with E = x⁻¹ ⊗ y.
Vec3 smallAngleBetween(const Quat& x, const Quat& y) {
  Quat e = x.conjugate() * y;
  if (e.w() < 0.0) e.coeffs() = -e.coeffs();
  return 2.0 * e.vec() / e.w();
}
}  // namespace

void NavState::toArray(double* out) const {
  for (int i = 0; i < 3; ++i) {
    out[i] = p[i];
    out[3 + i] = v[i];
    out[10 + i] = ba[i];
    out[13 + i] = bg[i];
  }
  out[6] = q.w();
  out[7] = q.x();
  out[8] = q.y();
  out[9] = q.z();
}

NavState NavState::fromArray(const double* in, double timestamp) {
  NavState x;
  x.timestamp = timestamp;
  x.p = Vec3(in[0], in[1], in[2]);
  x.v = Vec3(in[3], in[4], in[5]);
  x.q = Quat(in[6], in[7], in[8], in[9]);
  x.ba = Vec3(in[10], in[11], in[12]);
  x.bg = Vec3(in[13], in[14], in[15]);
  return x;
}

NavState boxPlus(const NavState& x, const Vector15& delta) {
  NavState y = x;
  y.p += delta.segment<3>(err::P);
  y.v += delta.segment<3>(err::V);
  y.q = attitude::applySmallAngle(x.q, delta.segment<3>(err::Phi));
  y.ba += delta.segment<3>(err::Ba);
  y.bg += delta.segment<3>(err::Bg);
  return y;
}

Vector15 boxMinus(const NavState& y, const NavState& x) {
  Vector15 d;
  d.segment<3>(err::P) = y.p - x.p;
  d.segment<3>(err::V) = y.v - x.v;
  d.segment<3>(err::Phi) = smallAngleBetween(x.q, y.q);
  d.segment<3>(err::Ba) = y.ba - x.ba;
  d.segment<3>(err::Bg) = y.bg - x.bg;
  return d;
}

Matrix15 boxMinusJacobian(const NavState& x, const NavState& x0) {
  Matrix15 J = Matrix15::Identity();
  const Vec3 u = 0.5 * smallAngleBetween(x0.q, x.q);
  J.block<3, 3>(err::Phi, err::Phi) = Mat3::Identity() + attitude::skew(u) + u * u.transpose();
  return J;
}

}  // namespace vlpins
