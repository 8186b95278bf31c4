#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "vlpins/attitude.hpp"
#include "vlpins/errors.hpp"

using namespace vlpins;
using namespace vlpins::attitude;

TEST(Attitude, IdentityGivesIdentityDcm) {
  EXPECT_TRUE(quatToDcm(Quat::Identity()).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Attitude, NinetyAboutXThirdColumn) {
  const double h = std::sqrt(0.5);
  const Dcm R = quatToDcm(Quat(h, h, 0.0, 0.0));
  EXPECT_NEAR(R(0, 2), 0.0, 1e-12);
  EXPECT_NEAR(R(1, 2), -1.0, 1e-12);
  EXPECT_NEAR(R(2, 2), 0.0, 1e-12);
}

TEST(Attitude, DoubleCover) {
  std::mt19937 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Quat q = test::randomQuat(rng);
    Quat neg = q;
    neg.coeffs() = -q.coeffs();
    EXPECT_TRUE(quatToDcm(q).isApprox(quatToDcm(neg), 1e-14));
  }
}

TEST(Attitude, RejectsNonUnit) {
  EXPECT_THROW(quatToDcm(Quat(1.0, 0.01, 0.0, 0.0)), InvalidQuaternion);
  EXPECT_NO_THROW(quatToDcm(Quat(1.0 + 5e-7, 0.0, 0.0, 0.0)));
}

TEST(Attitude, DcmIsProperOrthogonal) {
  std::mt19937 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Dcm R = quatToDcm(test::randomQuat(rng));
    EXPECT_LT((R * R.transpose() - Mat3::Identity()).norm(), 1e-9);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-9);
  }
}

TEST(Attitude, DcmRoundTrip) {
  std::mt19937 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Quat q = test::randomQuat(rng);
    const Quat back = dcmToQuat(quatToDcm(q));
    EXPECT_NEAR(std::abs(back.dot(q)), 1.0, 1e-9);
    EXPECT_NEAR(back.norm(), 1.0, 1e-9);
  }
}

TEST(Attitude, MultiplyIdentityAndInverse) {
  std::mt19937 rng(4);
  const Quat a = test::randomQuat(rng);
  EXPECT_TRUE(quatMultiply(a, Quat::Identity()).coeffs().isApprox(a.coeffs(), 1e-15));
  const Quat e = quatMultiply(a, a.conjugate());
  EXPECT_NEAR(std::abs(e.w()), 1.0, 1e-12);
  EXPECT_NEAR(e.vec().norm(), 0.0, 1e-12);
}

TEST(Attitude, TwoQuarterTurnsAboutX) {
  const double h = std::sqrt(0.5);
  const Quat q(h, h, 0.0, 0.0);
  const Quat c = quatMultiply(q, q);
  EXPECT_NEAR(c.w(), 0.0, 1e-12);
  EXPECT_NEAR(c.x(), 1.0, 1e-12);
  EXPECT_NEAR(c.y(), 0.0, 1e-12);
  EXPECT_NEAR(c.z(), 0.0, 1e-12);
  // Matrix composition as the oracle.
  const Mat3 Rx = quatToDcm(q);
  EXPECT_TRUE(quatToDcm(c).isApprox(Rx * Rx, 1e-12));
}

TEST(Attitude, MultiplyStaysUnit) {
  std::mt19937 rng(5);
  Quat q = Quat::Identity();
  for (int i = 0; i < 10000; ++i) q = quatMultiply(q, test::randomQuat(rng));
  EXPECT_NEAR(q.norm(), 1.0, 1e-9);
}

TEST(Attitude, SmallAngleZeroIsNoop) {
  std::mt19937 rng(6);
  const Quat q = test::randomQuat(rng);
  EXPECT_TRUE(applySmallAngle(q, Vec3::Zero()).coeffs().isApprox(q.coeffs(), 1e-15));
}

TEST(Attitude, SmallAngleAboutX) {
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    const Quat q = applySmallAngle(Quat::Identity(), Vec3(eps, 0.0, 0.0));
    const Quat exact(Eigen::AngleAxisd(eps, Vec3::UnitX()));
    EXPECT_LT((q.coeffs() - exact.coeffs()).norm(), eps * eps);
  }
}

TEST(Attitude, SmallAngleIsRightPerturbation) {
  std::mt19937 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Quat q = test::randomQuat(rng);
    const Vec3 dphi = test::randomVec(rng, 1e-3);
    const Mat3 R = quatToDcm(q);
    const Mat3 Rp = quatToDcm(applySmallAngle(q, dphi));
    // u-frame equivalent angle: R' = (I − [φ'×])R with φ' = −R·dφ.
    const Vec3 dphi_u = -R * dphi;
    const Mat3 approx = (Mat3::Identity() - skew(dphi_u)) * R;
    EXPECT_LT((Rp - approx).norm(), 10.0 * dphi.squaredNorm());
  }
}

TEST(Attitude, SmallAngleThirdOrderAgreement) {
  std::mt19937 rng(8);
  for (double mag : {1e-3, 1e-2}) {
    const Vec3 dir = test::randomVec(rng, 1.0).normalized();
    const Quat q = test::randomQuat(rng);
    const Quat a = applySmallAngle(q, mag * dir);
    const Quat b = q * expMap(mag * dir);
    EXPECT_LT(logMap(a.conjugate() * b).norm(), mag * mag * mag);
  }
}

TEST(Attitude, Skew) {
  EXPECT_TRUE(skew(Vec3::Zero()).isZero());
  EXPECT_TRUE((skew(Vec3::UnitX()) * Vec3::UnitY()).isApprox(Vec3::UnitZ()));
  std::mt19937 rng(9);
  const Vec3 v = test::randomVec(rng, 3.0);
  const Vec3 w = test::randomVec(rng, 3.0);
  EXPECT_TRUE(skew(v).transpose().isApprox(-skew(v)));
  EXPECT_TRUE((skew(v) * w).isApprox(v.cross(w), 1e-14));
}

TEST(Attitude, ExpLogRoundTrip) {
  std::mt19937 rng(10);
  for (int i = 0; i < 100; ++i) {
    const Vec3 phi = test::randomVec(rng, 1.5);
    EXPECT_LT((logMap(expMap(phi)) - phi).norm(), 1e-12);
  }
}

TEST(Attitude, RightJacobianMatchesFiniteDifference) {
  std::mt19937 rng(11);
  const Vec3 phi = test::randomVec(rng, 0.8);
  const Mat3 Jr = rightJacobian(phi);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    const Vec3 d = Vec3::Unit(k) * h;
    const Vec3 num = logMap(expMap(phi).conjugate() * expMap(phi + d)) / h;
    EXPECT_LT((num - Jr.col(k)).norm(), 1e-6);
  }
  EXPECT_TRUE((rightJacobianInverse(phi) * Jr).isApprox(Mat3::Identity(), 1e-10));
}

TEST(Attitude, EulerRoundTrip) {
  const Quat q = fromEuler(0.1, -0.2, 2.5);
  const Vec3 e = toEuler(q);
  EXPECT_NEAR(e.x(), 0.1, 1e-12);
  EXPECT_NEAR(e.y(), -0.2, 1e-12);
  EXPECT_NEAR(e.z(), 2.5, 1e-12);
}
