#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vlpins/blockage.hpp"
#include "vlpins/errors.hpp"

using namespace vlpins;
using vlpins::test::ceilingLed;

namespace {

DrdConfig config(double v_max = 1.0, double omega_max = 0.0) {
  DrdConfig cfg;
  cfg.v_max = v_max;
  cfg.omega_max = omega_max;
  return cfg;
}

// Runs the detector over one LED's stream and returns the tagged samples.
std::vector<TaggedRawSample> runStream(const std::vector<double>& values, double rate,
                                       double threshold, const DrdConfig& cfg) {
  DrdDetector det(cfg);
  std::vector<TaggedRawSample> out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out.push_back(det.push({i / rate, 1, values[i]}, threshold));
  return out;
}

}  // namespace

TEST(Blockage, RateRatioArithmetic) {
  EXPECT_DOUBLE_EQ(blockage::rateRatio(3.0, 3.0, 0.01), 0.0);
  EXPECT_NEAR(blockage::rateRatio(1.0, 0.2, 1.0 / 120), -96.0, 1e-12);
  EXPECT_NEAR(blockage::rateRatio(0.2, 1.0, 1.0 / 120), 480.0, 1e-12);
  EXPECT_THROW(blockage::rateRatio(0.0, 1.0, 0.01), UndefinedRatio);
}

TEST(Blockage, Threshold3dNadir) {
  const DrdConfig cfg = config(1.0, 0.0);
  const double t = blockage::threshold3d(Vec3::Zero(), Quat::Identity(), ceilingLed(1, {0, 0, 2}), cfg);
  EXPECT_NEAR(t, 1.0, 1e-15);
  EXPECT_NEAR(blockage::threshold3d(Vec3::Zero(), Quat::Identity(), ceilingLed(1, {0, 0, 2}),
                                    config(2.5, 0.0)),
              2.5, 1e-15);
}

TEST(Blockage, Threshold3dMonotone) {
  std::mt19937 rng(1);
  const LedBeacon led = ceilingLed(1, {1.0, 1.0, 3.0});
  const Vec3 pd(0.2, -0.4, 0.1);
  const Quat q = test::randomTiltedQuat(rng, 0.3);
  double prev = 0.0;
  for (double v : {0.1, 0.5, 1.0, 2.0}) {
    const double t = blockage::threshold3d(pd, q, led, config(v, 0.2));
    EXPECT_GT(t, prev);
    prev = t;
  }
  prev = 0.0;
  for (double w : {0.0, 0.1, 0.5, 1.0}) {
    const double t = blockage::threshold3d(pd, q, led, config(0.5, w));
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST(Blockage, Threshold2dArithmetic) {
  EXPECT_DOUBLE_EQ(blockage::threshold2d(0.0, 2.0, 1.0, 1.0), 0.0);
  EXPECT_NEAR(blockage::threshold2d(1.0, 2.0, 1.0, 1.0), 0.8, 1e-15);
  const double h = 2.3;
  const double peak = blockage::threshold2d(h, h, 1.0, 1.0);
  for (double s = 0.0; s < 10.0; s += 0.01) EXPECT_LE(blockage::threshold2d(s, h, 1.0, 1.0), peak + 1e-15);
}

TEST(Blockage, Threshold2dIsPlanarPartOfThreshold3d) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const LedBeacon led = ceilingLed(1, {u(rng), u(rng), 3.0}, 1.0 + i % 3);
    const Vec3 pd(u(rng), u(rng), 0.5);
    const auto g = channel::losGeometry(pd, Quat::Identity(), led);
    const double s = (led.position - pd).head<2>().norm();
    const double t2 = blockage::threshold2d(s, 2.5, led.lambertian_order, 0.7);
    EXPECT_NEAR(0.7 * channel::positionBracket(g, led).head<2>().norm(), t2, 1e-12);
    EXPECT_GE(blockage::threshold3d(pd, Quat::Identity(), led, config(0.7, 0.0)), t2 - 1e-12);
  }
}

TEST(Blockage, PlanarWorstCaseBoundsLevelThreshold) {
  const LedBeacon led = ceilingLed(1, {1.0, 2.0, 2.8});
  const DrdConfig cfg = config(0.5, 0.3);
  const double bound = blockage::planarWorstCaseThreshold(led, Vec2(0, 0), Vec2(3.8, 6.3), 0.3, cfg);
  for (double x = 0.0; x <= 3.8; x += 0.2) {
    for (double y = 0.0; y <= 6.3; y += 0.3) {
      const double s = (Vec2(x, y) - led.position.head<2>()).norm();
      const double live = blockage::threshold2d(s, 2.5, 1.0, cfg.v_max) + cfg.omega_max * s / 2.5;
      EXPECT_LE(live, bound + 1e-12);
    }
  }
}

TEST(Blockage, ConstantStreamNeverBlocks) {
  const auto out = runStream(std::vector<double>(500, 2.0), 120.0, 1.0, config());
  for (const auto& s : out) EXPECT_EQ(s.tag, BlockageTag::Unblocked);
  EXPECT_EQ(out.back().counter, 0);
}

TEST(Blockage, StepDownStepUpGivesOneInterval) {
  std::vector<double> v(360, 1.0);
  for (int i = 120; i < 240; ++i) v[i] = 0.02;
  const auto out = runStream(v, 120.0, 2.0, config());
  for (int i = 0; i < 360; ++i) {
    const bool blocked = i >= 120 && i < 240;
    EXPECT_EQ(out[i].tag == BlockageTag::Blocked, blocked) << i;
    EXPECT_EQ(out[i].counter % 2 == 1, blocked) << i;
  }
  EXPECT_EQ(out.back().counter, 2);
}

TEST(Blockage, HalfDropDetected) {
  std::vector<double> v(240, 1.0);
  for (int i = 60; i < 180; ++i) v[i] = 0.5;
  const auto out = runStream(v, 120.0, 2.0, config());
  EXPECT_EQ(out[100].tag, BlockageTag::Blocked);
  EXPECT_EQ(out.back().counter, 2);
}

TEST(Blockage, ZeroReadingWhileUnblockedBlocks) {
  std::vector<double> v{1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0};
  const auto out = runStream(v, 120.0, 2.0, config());
  EXPECT_EQ(out[2].tag, BlockageTag::Blocked);
  EXPECT_EQ(out[4].tag, BlockageTag::Blocked);
  EXPECT_EQ(out[5].tag, BlockageTag::Unblocked);
}

TEST(Blockage, SlowMotionWithinBoundsNeverTriggers) {
  // Receiver sweeps back and forth under an LED at 0.9 m/s with v_max = 1.
  const LedBeacon led = ceilingLed(1, {0.0, 0.0, 2.5});
  ReceiverConfig rx;
  const DrdConfig cfg = config(1.0, 0.0);
  DrdDetector det(cfg);
  const double rate = 120.0;
  for (int i = 0; i < 120 * 20; ++i) {
    const double t = i / rate;
    const double amp = 2.0;
    const double w = 0.9 / amp;  // peak speed 0.9 m/s
    const Vec3 pd(amp * std::sin(w * t), 0.3, 0.0);
    const double value = *channel::predictRss(pd, Quat::Identity(), led, rx);
    const auto tagged = det.push({t, 1, value}, blockage::threshold3d(pd, Quat::Identity(), led, cfg));
    ASSERT_EQ(tagged.tag, BlockageTag::Unblocked) << t;
  }
  EXPECT_EQ(det.state(1).counter, 0);
}

TEST(Blockage, CounterParityMatchesTag) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v;
  for (int i = 0; i < 2000; ++i) v.push_back(u(rng) < 0.1 ? 0.05 : 1.0 + 0.01 * u(rng));
  for (const auto& s : runStream(v, 120.0, 2.0, config()))
    EXPECT_EQ(s.counter % 2 == 1, s.tag == BlockageTag::Blocked);
}

TEST(Blockage, AnnotateEpochs) {
  // 120 Hz raw, 1 Hz epochs at t = 1, 2, 3 with windows (t − 0.5, t + 0.5].
  std::vector<TaggedRawSample> raw;
  for (int i = 0; i <= 4 * 120; ++i) {
    const double t = i / 120.0;
    const bool blocked = t > 1.9 && t < 3.2;
    raw.push_back({t, 1, blocked ? 0.0 : 1.0, blocked ? BlockageTag::Blocked : BlockageTag::Unblocked,
                   blocked ? 1 : 0});
  }
  std::vector<RssSample> epochs;
  for (int k = 1; k <= 3; ++k) epochs.push_back({double(k), 1, 1.0, 0.01, RssFlag::Los});
  epochs.push_back({2.0, 9, 1.0, 0.01, RssFlag::Los});  // LED with no raw coverage
  const auto out = blockage::annotateEpochs(raw, epochs, 1.0, 120.0, 0.0);
  EXPECT_EQ(out[0].flag, RssFlag::Los);
  EXPECT_EQ(out[1].flag, RssFlag::Blocked);
  EXPECT_EQ(out[2].flag, RssFlag::Blocked);
  EXPECT_EQ(out[3].flag, RssFlag::OutOfFov);
}

TEST(Blockage, ConfigValidation) {
  DrdConfig cfg;
  cfg.sample_rate = 50.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DrdConfig{};
  cfg.v_max = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
