#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "vlpins/csv.hpp"
#include "vlpins/dataset.hpp"
#include "vlpins/errors.hpp"
#include "vlpins/simulator.hpp"

using namespace vlpins;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

TrajectorySpec straightLeg(const Vec3& a, const Vec3& b, double speed) {
  TrajectorySpec t;
  t.waypoints = {{a, speed, 0.0}, {b, speed, 0.0}};
  return t;
}

Scenario quietScenario(const std::string& name) {
  Scenario s = referenceScenario(name);
  s.imu = ImuNoiseSpec{};
  s.rss = {0.0, 0.0};
  return s;
}

std::filesystem::path tempDir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vlpins_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Trajectory, CoincidentWaypointsAreStationary) {
  TrajectorySpec t;
  t.waypoints = {{Vec3(1, 1, 0), 0.5, 2.0}, {Vec3(1, 1, 0), 0.5, 3.0}};
  const Trajectory traj(t);
  EXPECT_DOUBLE_EQ(traj.duration(), 5.0);
  for (const auto& s : traj.sample(100.0)) {
    EXPECT_EQ(s.v.norm(), 0.0);
    EXPECT_EQ(s.omega.norm(), 0.0);
    EXPECT_EQ((s.p - Vec3(1, 1, 0)).norm(), 0.0);
  }
}

TEST(Trajectory, StraightLegDurationAndCruise) {
  const Trajectory traj(straightLeg(Vec3(0, 0, 0), Vec3(5, 0, 0), 0.5));
  EXPECT_NEAR(traj.duration(), 10.0, 1e-12);
  const double vc = traj.at(5.0).v.x();
  for (double t = 2.0; t <= 8.0; t += 0.25) {
    EXPECT_NEAR(traj.at(t).v.x(), vc, 1e-12);
    EXPECT_NEAR(traj.at(t).a.norm(), 0.0, 1e-12);
  }
  EXPECT_NEAR(traj.at(0.0).v.norm(), 0.0, 1e-12);
  EXPECT_NEAR(traj.at(10.0).v.norm(), 0.0, 1e-12);
  EXPECT_NEAR((traj.at(10.0).p - Vec3(5, 0, 0)).norm(), 0.0, 1e-12);
}

TEST(Trajectory, UphillPitchMatchesSlope) {
  const Trajectory traj(straightLeg(Vec3(0, 0, 0), Vec3(4, 0, 1), 0.4));
  const double slope = std::atan2(1.0, 4.0);
  double prev_z = -1.0;
  for (double t = 0.0; t <= traj.duration(); t += 0.1) {
    const auto k = traj.at(t);
    EXPECT_GE(k.p.z(), prev_z);
    prev_z = k.p.z();
  }
  // Nose-up is a negative pitch with x forward and z up.
  const double mid = traj.duration() - 5.0;
  EXPECT_NEAR(attitude::toEuler(traj.at(mid).q).y(), -slope, 1e-12);
  EXPECT_NEAR(std::atan2(traj.at(mid).v.z(), traj.at(mid).v.head<2>().norm()), slope, 1e-12);
}

TEST(Trajectory, SpeedLimitViolationsThrow) {
  TrajectorySpec fast = straightLeg(Vec3(0, 0, 0), Vec3(5, 0, 0), 1.5);
  EXPECT_THROW(Trajectory{fast}, ConfigError);
  // Ramps push the cruise speed above the nominal one on short legs.
  TrajectorySpec shortleg = straightLeg(Vec3(0, 0, 0), Vec3(1.5, 0, 0), 0.9);
  EXPECT_THROW(Trajectory{shortleg}, ConfigError);
  TrajectorySpec vertical = straightLeg(Vec3(0, 0, 0), Vec3(0, 0, 1), 0.2);
  EXPECT_THROW(Trajectory{vertical}, ConfigError);
  TrajectorySpec one;
  one.waypoints = {{Vec3(0, 0, 0), 0.5, 0.0}};
  EXPECT_THROW(Trajectory{one}, ConfigError);
}

TEST(Trajectory, TurnsInPlaceWithinRateLimit) {
  TrajectorySpec t;
  t.waypoints = {{Vec3(0, 0, 0), 0.5, 0.0}, {Vec3(2, 0, 0), 0.5, 0.0}, {Vec3(2, 2, 0), 0.5, 0.0}};
  const Trajectory traj(t);
  double peak = 0.0;
  for (const auto& s : traj.sample(200.0)) peak = std::max(peak, s.omega.norm());
  EXPECT_NEAR(peak, t.turn_rate, 1e-3);
  EXPECT_NEAR(attitude::toEuler(traj.at(traj.duration()).q).z(), std::numbers::pi / 2, 1e-12);
}

TEST(Imu, StationaryGravityReaction) {
  TrajectorySpec t;
  t.waypoints = {{Vec3(0, 0, 0), 0.5, 2.0}, {Vec3(0, 0, 0), 0.5, 0.0}};
  t.initial_heading = 0.7;
  const auto truth = Trajectory(t).sample(100.0);
  const Dcm R_bv = attitude::fromEuler(0.02, -0.03, 0.1).toRotationMatrix();
  const auto imu = synthesizeImu(truth, ImuNoiseSpec{}, R_bv, kDefaultGravity, 1);
  const Mat3 R = truth[0].q.toRotationMatrix();
  const Vec3 expected = R_bv.transpose() * R.transpose() * -kDefaultGravity;
  for (const auto& s : imu.samples) {
    EXPECT_LT((s.accel - expected).norm(), 1e-12);
    EXPECT_EQ(s.gyro.norm(), 0.0);
  }
}

TEST(Imu, CircularMotionCentripetalForce) {
  const double r = 2.0, v = 0.5, w = v / r;
  auto pose = [&](double t) {
    KinematicPose k;
    const double a = w * t;
    k.p = Vec3(r * std::cos(a), r * std::sin(a), 0.0);
    k.v = Vec3(-v * std::sin(a), v * std::cos(a), 0.0);
    k.q = attitude::fromEuler(0.0, 0.0, a + std::numbers::pi / 2);
    return k;
  };
  const auto truth = sampleTruth(pose, 20.0, 200.0);
  const auto imu = synthesizeImu(truth, ImuNoiseSpec{}, Dcm::Identity(), kDefaultGravity, 1);
  for (std::size_t i = 0; i + 1 < imu.samples.size(); i += 97) {
    const Vec3& f = imu.samples[i].accel;
    EXPECT_NEAR(f.head<2>().norm(), v * v / r, 1e-6);
    // Points to the circle centre, which is the vehicle's left.
    EXPECT_NEAR(f.y(), v * v / r, 1e-6);
    EXPECT_NEAR(f.z(), 9.80665, 1e-9);
    // Tangent-map increment: relative discretization error (w·dt)²/12.
    EXPECT_NEAR(imu.samples[i].gyro.z(), w, 1e-6);
  }
}

TEST(Imu, AllanDeviationMatchesWhiteNoiseLevel) {
  TrajectorySpec t;
  t.waypoints = {{Vec3(0, 0, 0), 0.5, 100.0}, {Vec3(0, 0, 0), 0.5, 0.0}};
  const double rate = 200.0;
  const auto truth = Trajectory(t).sample(rate);
  ImuNoiseSpec n = ImuNoiseSpec::hguideI300().scaled(5.0);
  n.accel_bias_instability = n.gyro_bias_instability = 0.0;
  const auto imu = synthesizeImu(truth, n, Dcm::Identity(), kDefaultGravity, 42);

  // Overlapping Allan deviation at τ = 0.1 s; white noise gives N/√τ.
  const int m = 20;
  const double tau = m / rate;
  for (int axis = 0; axis < 6; ++axis) {
    std::vector<double> x(imu.samples.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = axis < 3 ? imu.samples[i].accel[axis] : imu.samples[i].gyro[axis - 3];
    std::vector<double> cum(x.size() + 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) cum[i + 1] = cum[i] + x[i];
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k + 2 * m <= x.size(); ++k) {
      const double a = (cum[k + m] - cum[k]) / m;
      const double b = (cum[k + 2 * m] - cum[k + m]) / m;
      sum += 0.5 * (b - a) * (b - a);
      ++count;
    }
    const double adev = std::sqrt(sum / count);
    const double density = axis < 3 ? n.velocity_random_walk : n.angle_random_walk;
    EXPECT_NEAR(adev * std::sqrt(tau) / density, 1.0, 0.1) << "axis " << axis;
  }
}

TEST(Imu, NoiselessIntegrationReproducesTruth) {
  Scenario s = quietScenario("sim3d");
  s.imu = ImuNoiseSpec{};
  const Dataset d = simulate(s);
  const double horizon = 60.0;
  const auto n = static_cast<std::size_t>(horizon * s.rates.imu);
  ASSERT_GT(d.imu.size(), n);
  const auto pre = preintegrate(std::span(d.imu).first(n), horizon, ImuBias{}, s.receiver.R_b_to_v,
                                ImuNoiseDensity{});
  const NavState end = propagate(pre, d.truth.front(), s.gravity);
  EXPECT_LT((end.p - d.truth[n].p).norm(), 1e-4);
  EXPECT_LT((end.v - d.truth[n].v).norm(), 1e-5);
  EXPECT_LT(attitude::logMap(end.q.conjugate() * d.truth[n].q).norm(), 1e-8);
}

TEST(Rss, StaticNadirRawIsConstant) {
  Scenario s = quietScenario("sim3d");
  s.trajectory.waypoints = {{Vec3(2.5, 2.5, 0), 0.5, 5.0}, {Vec3(2.5, 2.5, 0), 0.5, 0.0}};
  s.trajectory.initial_heading = 0.0;
  s.blockages.clear();
  const Trajectory traj(s.trajectory);
  const auto truth = traj.sample(s.rates.imu);
  const auto rss = synthesizeRss(traj, truth, s, 1);
  const LedBeacon& led = *findLed(s.leds, 5);
  const Vec3 pd = truth[0].p + truth[0].q.toRotationMatrix() * s.receiver.leverArmV();
  const double expected = *channel::predictRss(pd, truth[0].q, led, s.receiver);
  int seen = 0;
  for (const auto& r : rss.raw) {
    if (r.led_id != 5) continue;
    EXPECT_DOUBLE_EQ(r.value, expected);
    ++seen;
  }
  EXPECT_EQ(seen, static_cast<int>(std::floor(traj.duration() * 120.0 + 1e-9)) + 1);
}

TEST(Rss, HalfBlockedWindowHalvesEpochValue) {
  Scenario s = quietScenario("sim3d");
  s.trajectory.waypoints = {{Vec3(2.5, 2.5, 0), 0.5, 5.0}, {Vec3(2.5, 2.5, 0), 0.5, 0.0}};
  s.trajectory.initial_heading = 0.0;
  s.blockages = {{5, 2.75, 3.0}};  // first half of (2.75, 3.25]
  const Dataset d = simulate(s);
  const RssSample* blocked = nullptr;
  const RssSample* clear = nullptr;
  for (const auto& e : d.rss_epoch) {
    if (e.led_id != 5) continue;
    if (e.timestamp == 3.0) blocked = &e;
    if (e.timestamp == 2.0) clear = &e;
  }
  ASSERT_TRUE(blocked && clear);
  EXPECT_DOUBLE_EQ(blocked->value, 0.5 * clear->value);
  EXPECT_EQ(blocked->flag, RssFlag::Blocked);
  EXPECT_EQ(clear->flag, RssFlag::Los);
}

TEST(Rss, OutOfFovFlag) {
  Scenario s = quietScenario("sim3d");
  s.receiver.fov_half_angle = 20.0 * kDeg;
  s.blockages.clear();
  s.trajectory.waypoints = {{Vec3(4.5, 4.5, 0), 0.5, 3.0}, {Vec3(4.5, 4.5, 0), 0.5, 0.0}};
  const Dataset d = simulate(s);
  bool saw_far = false;
  for (const auto& e : d.rss_epoch) {
    if (e.led_id == 1) {
      EXPECT_EQ(e.flag, RssFlag::OutOfFov);
      saw_far = true;
    }
  }
  EXPECT_TRUE(saw_far);
  for (const auto& r : d.rss_raw) EXPECT_NE(r.led_id, 1);
}

TEST(Rss, EpochLabelsMatchSchedule) {
  const Dataset d = simulate(referenceScenario("sim3d"));
  const auto& sc = d.scenario;
  for (const auto& e : d.rss_epoch) {
    bool overlaps = false;
    for (const auto& b : sc.blockages)
      overlaps = overlaps || (b.led_id == e.led_id && b.start < e.timestamp + 0.5 * sc.rates.epoch_window &&
                              b.end > e.timestamp - 0.5 * sc.rates.epoch_window);
    EXPECT_EQ(e.flag == RssFlag::Blocked, overlaps) << e.timestamp << " led " << e.led_id;
  }
}

TEST(BlockedFraction, Coverage) {
  const std::vector<BlockageInterval> sched{{1, 0.0, 1.0}, {1, 0.5, 2.0}, {2, 0.0, 10.0}};
  EXPECT_DOUBLE_EQ(blockedFraction(sched, 1, 1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(blockedFraction(sched, 1, 2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(blockedFraction(sched, 1, 3.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(blockedFraction(sched, 3, 1.0, 1.0), 0.0);
}

TEST(Fixtures, Sim3d) {
  const Scenario s = referenceScenario("sim3d");
  EXPECT_EQ(s.trajectory.waypoints.front().position, Vec3(5, 0, 0));
  EXPECT_EQ(s.room.max - s.room.min, Vec3(5, 5, 5));
  EXPECT_NEAR(s.imu.angle_random_walk, 5 * 0.25 * kDeg / 60.0, 1e-15);
  EXPECT_NEAR(s.imu.velocity_random_walk, 5 * 0.03 / 60.0, 1e-15);
  EXPECT_NEAR(s.imu.accel_bias_instability, 5 * 0.03e-3 * 9.80665, 1e-15);
  EXPECT_NEAR(s.imu.gyro_bias_instability, 5 * 5.0 * kDeg / 3600.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.rss.sigma, 0.1);
  EXPECT_GE(s.blockages.size(), 3u);
  double zmax = 0.0;
  for (const auto& w : s.trajectory.waypoints) zmax = std::max(zmax, w.position.z());
  EXPECT_GT(zmax, 0.0);

  const Dataset d = simulate(s);
  std::size_t epochs = 0;
  for (std::size_t i = 0; i < d.rss_epoch.size(); ++i)
    epochs += i == 0 || d.rss_epoch[i].timestamp != d.rss_epoch[i - 1].timestamp;
  const double duration = d.truth.back().timestamp;
  EXPECT_EQ(epochs, static_cast<std::size_t>(std::floor(duration - 0.5 * s.rates.epoch_window)));
}

TEST(Fixtures, ExpA) {
  const Scenario s = referenceScenario("expA");
  EXPECT_EQ(s.room.max - s.room.min, Vec3(3.8, 6.3, 2.8));
  ASSERT_EQ(s.leds.size(), 5u);
  const std::vector<Vec2> xy{{0.35, 1.34}, {3.56, 1.15}, {1.71, 3.31}, {3.50, 6.25}, {0.35, 5.97}};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(s.leds[i].position.head<2>(), xy[i]);
  EXPECT_FALSE(s.trajectory.gimbal.empty());
  EXPECT_NO_THROW(simulate(s));
  for (const auto& name : referenceScenarioNames()) EXPECT_NO_THROW(referenceScenario(name));
  EXPECT_THROW(referenceScenario("nope"), ConfigError);
}

TEST(Scenario, JsonRoundTrip) {
  for (const auto& name : referenceScenarioNames()) {
    const Scenario s = referenceScenario(name);
    const nlohmann::json j = s;
    const Scenario back = j.get<Scenario>();
    const nlohmann::json j2 = back;
    EXPECT_EQ(j.dump(), j2.dump()) << name;
  }
  nlohmann::json bad = referenceScenario("sim3d");
  bad["rates"]["imu_hz"] = 50.0;
  EXPECT_THROW(bad.get<Scenario>(), ConfigError);
  bad = referenceScenario("sim3d");
  bad.erase("room");
  EXPECT_THROW(bad.get<Scenario>(), ConfigError);
}

TEST(Scenario, TrajectoryOutsideRoomThrows) {
  Scenario s = referenceScenario("sim3d");
  s.room.max.x() = 4.5;
  EXPECT_THROW(simulate(s), ConfigError);
}

TEST(Dataset, DeterministicAndRoundTrips) {
  const Scenario s = referenceScenario("expA");
  const Dataset a = simulate(s, 7);
  const Dataset b = simulate(s, 7);
  const Dataset c = simulate(s, 8);
  ASSERT_EQ(a.imu.size(), b.imu.size());
  for (std::size_t i = 0; i < a.imu.size(); ++i) {
    EXPECT_EQ(a.imu[i].accel, b.imu[i].accel);
    EXPECT_EQ(a.imu[i].gyro, b.imu[i].gyro);
  }
  EXPECT_NE(a.imu[10].accel, c.imu[10].accel);

  const auto da = tempDir("det_a"), db = tempDir("det_b");
  const auto ha = writeDataset(a, da);
  const auto hb = writeDataset(b, db);
  EXPECT_EQ(ha, hb);

  const Dataset r = readDataset(da);
  ASSERT_EQ(r.imu.size(), a.imu.size());
  EXPECT_EQ(r.imu[123].accel, a.imu[123].accel);
  ASSERT_EQ(r.rss_epoch.size(), a.rss_epoch.size());
  EXPECT_EQ(r.rss_epoch[42].value, a.rss_epoch[42].value);
  EXPECT_EQ(r.rss_epoch[42].flag, a.rss_epoch[42].flag);
  ASSERT_EQ(r.rss_raw.size(), a.rss_raw.size());
  ASSERT_EQ(r.truth.size(), a.truth.size());
  EXPECT_EQ(r.truth[500].p, a.truth[500].p);
  EXPECT_EQ(r.scenario.seed, 7u);
  EXPECT_EQ(r.scenario.blockages.size(), a.scenario.blockages.size());
  std::filesystem::remove_all(da);
  std::filesystem::remove_all(db);
}

TEST(Dataset, MissingDirectoryIsConfigError) {
  EXPECT_THROW(readDataset("/nonexistent/vlpins"), ConfigError);
}

TEST(Csv, FormatRoundTripsAndHashIsStable) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 12345.678}) EXPECT_EQ(csv::toDouble(csv::format(v), "v"), v);
  EXPECT_EQ(csv::fnv1a(std::string_view("")), "cbf29ce484222325");
  EXPECT_EQ(csv::fnv1a(std::string_view("a")), "af63dc4c8601ec8c");
}
