#include <numbers>

#include "vlpins/errors.hpp"
#include "vlpins/simulator.hpp"

namespace vlpins {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

LedBeacon ceiling(int id, double x, double y, double z) {
  LedBeacon led;
  led.id = id;
  led.position = Vec3(x, y, z);
  led.normal = Vec3::UnitZ();
  led.lambertian_order = 1.0;
  led.transmit_power = 1.0;
  led.modulation_freq = 1000.0 * id;
  return led;
}

Waypoint wp(double x, double y, double z, double speed, double dwell = 0.5) {
  return {Vec3(x, y, z), speed, dwell};
}

// 5 m cube, start at (5, 0, 0), an uphill ramp and several LED blockages.
Scenario sim3d(bool blocked) {
  Scenario s;
  s.name = blocked ? "sim3d" : "sim3d_clean";
  s.seed = 1;
  s.room = {Vec3(0, 0, 0), Vec3(5, 5, 5)};
  int id = 1;
  for (double y : {1.0, 2.5, 4.0})
    for (double x : {1.0, 2.5, 4.0}) s.leds.push_back(ceiling(id++, x, y, 5.0));

  s.receiver.effective_area = 1e-4;
  s.receiver.responsivity = 3.0e8;  // lux-like units, about 500 at nadir
  s.receiver.lever_arm = Vec3(0.05, 0.0, 0.15);
  s.receiver.R_b_to_v = attitude::fromEuler(0.5 * kDeg, -1.0 * kDeg, 2.0 * kDeg).toRotationMatrix();
  s.receiver.pd_height = 0.15;

  auto& t = s.trajectory;
  t.initial_heading = 135.0 * kDeg;
  t.initial_static = 5.0;
  t.end_hold = 3.0;
  t.turn_rate = 20.0 * kDeg;
  t.max_speed = 1.0;
  t.max_turn_rate = 0.5;
  t.waypoints = {wp(5.0, 0.0, 0.0, 0.4, 0.0), wp(4.0, 1.0, 0.0, 0.4), wp(4.0, 2.0, 0.0, 0.4),
                 wp(4.0, 4.0, 0.5, 0.3), wp(1.2, 4.0, 0.5, 0.4), wp(1.2, 1.6, 0.5, 0.4),
                 wp(2.6, 1.6, 0.5, 0.4), wp(2.6, 3.0, 0.5, 0.4)};

  s.imu = ImuNoiseSpec::hguideI300().scaled(5.0);
  s.imu.initial_accel_bias = Vec3(4e-3, -3e-3, 5e-3);
  s.imu.initial_gyro_bias = Vec3(3e-5, -2e-5, 4e-5);
  s.rss = {0.1, 0.1};
  if (blocked)
    s.blockages = {{5, 14.3, 16.0}, {2, 27.75, 29.5}, {8, 41.0, 44.2}, {5, 55.6, 56.4},
                   {3, 66.25, 68.0}, {9, 78.0, 80.75}};
  s.rates = {200.0, 120.0, 1.0, 0.5};
  return s;
}

// Experiment A room: five ceiling LEDs, a gimbal-mounted receiver tilted during
// two laps of a rectangular route.
Scenario expA(const std::string& name, bool blocked, bool tilted) {
  Scenario s;
  s.name = name;
  s.seed = 1;
  s.room = {Vec3(0, 0, 0), Vec3(3.8, 6.3, 2.8)};
  s.leds = {ceiling(1, 0.35, 1.34, 2.8), ceiling(2, 3.56, 1.15, 2.8), ceiling(3, 1.71, 3.31, 2.8),
            ceiling(4, 3.50, 6.25, 2.8), ceiling(5, 0.35, 5.97, 2.8)};

  s.receiver.effective_area = 1e-4;
  s.receiver.responsivity = 2.0e7;  // about 100 at nadir
  s.receiver.lever_arm = Vec3(0.0, 0.0, 0.05);
  s.receiver.pd_height = 0.35;

  const double z = s.receiver.pd_height - s.receiver.leverArmV().z();
  auto& t = s.trajectory;
  t.initial_heading = 0.0;
  t.initial_static = 5.0;
  t.end_hold = 3.0;
  t.turn_rate = 20.0 * kDeg;
  t.max_speed = 1.0;
  t.max_turn_rate = 0.5;
  t.waypoints = {wp(0.9, 1.0, z, 0.3, 0.0)};
  for (int lap = 0; lap < 2; ++lap)
    for (const auto& [x, y] : {std::pair{2.9, 1.0}, {2.9, 5.4}, {0.9, 5.4}, {0.9, 1.0}})
      t.waypoints.push_back(wp(x, y, z, 0.3));
  if (tilted)
    t.gimbal = {{10.0, 0.0},           {13.0, -15.0 * kDeg}, {40.0, -15.0 * kDeg}, {43.0, 0.0},
                {60.0, 0.0},           {64.0, 12.0 * kDeg},  {90.0, 12.0 * kDeg},  {94.0, -8.0 * kDeg},
                {120.0, -8.0 * kDeg},  {123.0, 0.0}};

  s.imu = ImuNoiseSpec::hguideI300();
  s.imu.initial_accel_bias = Vec3(2e-3, -1e-3, 2e-3);
  s.imu.initial_gyro_bias = Vec3(2e-5, -1e-5, 2e-5);
  s.rss = {0.5, 0.005};
  if (blocked)
    // A pedestrian crossing the room shadows two LEDs at a time.
    s.blockages = {{3, 20.25, 24.0}, {1, 20.6, 23.1},  {1, 33.0, 36.5},   {2, 34.2, 37.4},
                   {2, 50.6, 53.0},  {3, 51.1, 54.6},  {5, 71.0, 75.25},  {4, 72.3, 74.1},
                   {4, 97.0, 99.6},  {3, 97.4, 101.2}, {3, 112.3, 116.0}, {5, 113.2, 115.6},
                   {1, 135.0, 138.0}, {2, 136.1, 139.6}};
  s.rates = {200.0, 120.0, 1.0, 0.5};
  return s;
}

}  // namespace

std::vector<std::string> referenceScenarioNames() {
  return {"sim3d", "sim3d_clean", "expA", "expA_clean", "expA_level", "expA_normal"};
}

Scenario referenceScenario(const std::string& name) {
  Scenario s;
  if (name == "sim3d")
    s = sim3d(true);
  else if (name == "sim3d_clean")
    s = sim3d(false);
  else if (name == "expA")
    s = expA(name, true, true);
  else if (name == "expA_clean")
    s = expA(name, false, true);
  else if (name == "expA_level")
    s = expA(name, true, false);
  else if (name == "expA_normal")
    s = expA(name, false, false);
  else
    throw ConfigError("unknown reference scenario '" + name + "'");
  s.validate();
  return s;
}

}  // namespace vlpins
