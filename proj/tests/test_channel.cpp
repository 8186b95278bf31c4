#include <gtest/gtest.h>

#include <array>
#include <random>

#include "test_util.hpp"
#include "vlpins/channel.hpp"
#include "vlpins/errors.hpp"

using namespace vlpins;
using vlpins::test::ceilingLed;

namespace {

ReceiverConfig unitReceiver() {
  ReceiverConfig rx;
  rx.effective_area = 1e-4;
  return rx;
}

LedBeacon upwardLed(const Vec3& pos) {
  LedBeacon led;
  led.id = 1;
  led.position = pos;
  led.normal = Vec3::UnitZ();
  led.transmit_power = 10.0;
  return led;
}

const std::array<Vec2, 5> kExpALeds = {Vec2(0.35, 1.34), Vec2(3.56, 1.15), Vec2(1.71, 3.31),
                                       Vec2(3.50, 6.25), Vec2(0.35, 5.97)};

}  // namespace

TEST(Channel, NadirGeometry) {
  const auto g = channel::losGeometry(Vec3::Zero(), Quat::Identity(), upwardLed({0, 0, 2}));
  EXPECT_DOUBLE_EQ(g.distance, 2.0);
  EXPECT_DOUBLE_EQ(g.cos_psi, 1.0);
  EXPECT_DOUBLE_EQ(g.cos_theta, 1.0);
}

TEST(Channel, OffsetGeometry) {
  const auto g = channel::losGeometry(Vec3::Zero(), Quat::Identity(), upwardLed({2, 0, 2}));
  EXPECT_NEAR(g.distance, 2.0 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(g.cos_psi, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(g.cos_theta, 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Channel, PitchedNinetyIsGrazing) {
  const Quat q(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY()));
  const auto g = channel::losGeometry(Vec3::Zero(), q, upwardLed({0, 0, 2}));
  EXPECT_NEAR(g.cos_psi, 0.0, 1e-15);
}

TEST(Channel, CoincidentThrows) {
  EXPECT_THROW(channel::losGeometry(Vec3(0, 0, 2), Quat::Identity(), upwardLed({0, 0, 2})),
               DegenerateGeometry);
}

TEST(Channel, ReceiverNormal) {
  EXPECT_TRUE(channel::receiverNormal(Quat::Identity()).isApprox(Vec3::UnitZ()));
  const double a = 10.0 * M_PI / 180.0;
  const Vec3 n = channel::receiverNormal(Quat(Eigen::AngleAxisd(a, Vec3::UnitY())));
  EXPECT_NEAR(n.x(), std::sin(a), 1e-15);
  EXPECT_NEAR(n.y(), 0.0, 1e-15);
  EXPECT_NEAR(n.z(), std::cos(a), 1e-15);
  std::mt19937 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Quat q = test::randomQuat(rng);
    const Vec3 ni = channel::receiverNormal(q);
    EXPECT_NEAR(ni.norm(), 1.0, 1e-12);
    EXPECT_TRUE(ni.isApprox(q.toRotationMatrix().col(2), 1e-12));
  }
}

TEST(Channel, NadirPower) {
  const auto p = channel::predictRss(Vec3::Zero(), Quat::Identity(), upwardLed({0, 0, 2}),
                                     unitReceiver());
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(*p, 7.9577e-5, 5e-9);
  const auto p4 = channel::predictRss(Vec3::Zero(), Quat::Identity(), upwardLed({0, 0, 4}),
                                      unitReceiver());
  EXPECT_NEAR(*p4 / *p, 0.25, 1e-15);
}

TEST(Channel, GrazingIsZeroAndBackfacingOutOfFov) {
  const Quat q(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY()));
  const auto p = channel::predictRss(Vec3::Zero(), q, upwardLed({0, 0, 2}), unitReceiver());
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(*p, 0.0, 1e-15 * 7.9577e-5);
  const Quat flipped(Eigen::AngleAxisd(M_PI, Vec3::UnitY()));
  EXPECT_FALSE(channel::predictRss(Vec3::Zero(), flipped, upwardLed({0, 0, 2}), unitReceiver()));
  ReceiverConfig narrow = unitReceiver();
  narrow.fov_half_angle = 30.0 * M_PI / 180.0;
  EXPECT_FALSE(channel::predictRss(Vec3::Zero(), Quat::Identity(), upwardLed({3, 0, 2}), narrow));
}

TEST(Channel, RefactoredFormEqualsAngleForm) {
  std::mt19937 rng(2);
  const ReceiverConfig rx = unitReceiver();
  for (int i = 0; i < 200; ++i) {
    const LedBeacon led = ceilingLed(1, Vec3(0, 0, 3) + test::randomVec(rng, 1.0), 1.0 + i % 3);
    const Vec3 pd = test::randomVec(rng, 1.5);
    const Quat q = test::randomTiltedQuat(rng, 0.4);
    const auto g = channel::losGeometry(pd, q, led);
    const double m = led.lambertian_order;
    const double angle_form = channel::channelGain(led, rx) / (g.distance * g.distance) *
                              std::pow(g.cos_theta, m) * g.cos_psi;
    EXPECT_LT(test::relErr(channel::rssUnchecked(g, led, rx), angle_form), 1e-12);
  }
}

TEST(Channel, JacobianAtNadirHasNoAttitudeTerm) {
  const auto J = channel::rssJacobian(Vec3::Zero(), Quat::Identity(), ceilingLed(1, {0, 0, 2}),
                                      unitReceiver());
  EXPECT_LT(J.d_attitude_u.norm(), 1e-20);
}

TEST(Channel, JacobiansMatchFiniteDifferences) {
  std::mt19937 rng(3);
  const ReceiverConfig rx = unitReceiver();
  const double h = 1e-6;
  for (int i = 0; i < 300; ++i) {
    const LedBeacon led = ceilingLed(1, Vec3(0, 0, 3) + test::randomVec(rng, 1.0), 1.0 + i % 3);
    const Vec3 pd = test::randomVec(rng, 1.5);
    const Quat q = test::randomTiltedQuat(rng, 0.5);
    const auto J = channel::rssJacobian(pd, q, led, rx);
    const auto P = [&](const Vec3& p, const Quat& qq) {
      return channel::rssUnchecked(channel::losGeometry(p, qq, led), led, rx);
    };
    const double scale = 1e-3 * (J.d_position.norm() + J.d_attitude_u.norm());
    for (int k = 0; k < 3; ++k) {
      const Vec3 d = Vec3::Unit(k) * h;
      const double num_r = (P(pd + d, q) - P(pd - d, q)) / (2 * h);
      EXPECT_LT(test::scaledErr(J.d_position[k], num_r, scale), 1e-5);
      // u-frame disturbance R' = (I − [dφ×])R.
      const double num_a =
          (P(pd, attitude::expMap(-d) * q) - P(pd, attitude::expMap(d) * q)) / (2 * h);
      EXPECT_LT(test::scaledErr(J.d_attitude_u[k], num_a, scale), 1e-5);
    }
    const auto J2 = channel::rssJacobian2d(pd, q, led, rx);
    EXPECT_DOUBLE_EQ(J2.d_planar.x(), J.d_position.x());
    EXPECT_DOUBLE_EQ(J2.d_planar.y(), J.d_position.y());
  }
}

TEST(Channel, PlanarJacobianLevelForm) {
  const LedBeacon led = ceilingLed(1, {1.0, 0.5, 2.5}, 2.0);
  const Vec3 pd(0.2, -0.3, 0.0);
  const auto J = channel::rssJacobian2d(pd, Quat::Identity(), led, unitReceiver());
  const Vec3 D = led.position - pd;
  const Vec2 expected = J.rss * (3.0 + 2.0) * D.head<2>() / D.squaredNorm();
  EXPECT_LT((J.d_planar - expected).norm(), 1e-12 * expected.norm());
}

TEST(Channel, SingularJacobianRejected) {
  const Quat q(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY()));
  EXPECT_THROW(channel::rssJacobian(Vec3::Zero(), q, ceilingLed(1, {0, 0, 2}), unitReceiver()),
               NearSingular);
}

TEST(Channel, HeadingNullDirection) {
  std::mt19937 rng(4);
  const ReceiverConfig rx = unitReceiver();
  for (int i = 0; i < 500; ++i) {
    const LedBeacon led = ceilingLed(1, Vec3(0, 0, 3) + test::randomVec(rng, 1.0));
    const Vec3 pd = test::randomVec(rng, 1.5);
    const Quat q = test::randomTiltedQuat(rng, 0.5);
    const auto J = channel::rssJacobian(pd, q, led, rx);
    EXPECT_LT(std::abs(J.d_attitude_u.dot(channel::receiverNormal(q))),
              1e-12 * J.d_attitude_u.norm() + 1e-300);
  }
}

TEST(Channel, HeadingInformationExperimentALayout) {
  std::vector<LedBeacon> leds;
  for (int i = 0; i < 5; ++i)
    leds.push_back(ceilingLed(i + 1, Vec3(kExpALeds[i].x(), kExpALeds[i].y(), 2.8)));
  const ReceiverConfig rx = unitReceiver();
  EXPECT_LT(channel::headingInformation(Vec3(1.9, 3.1, 0.3), Quat::Identity(), leds, rx), 1e-30);
  std::mt19937 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Quat q = test::randomTiltedQuat(rng, 0.3);
    const Vec3 pd(1.0 + 2.0 * (i % 3) / 2.0, 1.5 + 0.07 * i, 0.3);
    double total = 0.0;
    for (const auto& led : leds) total += channel::rssJacobian(pd, q, led, rx).d_attitude_u.squaredNorm();
    EXPECT_LT(channel::headingInformation(pd, q, leds, rx), 1e-24 * total + 1e-300);
  }
}

TEST(Channel, LedJsonRoundTrip) {
  const LedBeacon led = ceilingLed(7, {1.0, 2.0, 3.0}, 1.5);
  const nlohmann::json j = led;
  const LedBeacon back = j.get<LedBeacon>();
  EXPECT_EQ(back.id, 7);
  EXPECT_TRUE(back.position.isApprox(led.position));
  EXPECT_TRUE(back.normal.isApprox(led.normal));
  EXPECT_DOUBLE_EQ(back.lambertian_order, 1.5);
}

TEST(Channel, InvalidLedRejected) {
  nlohmann::json j = ceilingLed(1, {0, 0, 2});
  j["normal"] = {0.0, 0.0, 2.0};
  EXPECT_THROW(j.get<LedBeacon>(), ConfigError);
}
