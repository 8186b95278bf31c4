#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlpins/blockage.hpp"
#include "vlpins/channel.hpp"
#include "vlpins/nav_state.hpp"
#include "vlpins/preint.hpp"

namespace vlpins {

struct Room {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p, double tol = 1e-9) const;
};

struct Waypoint {
  Vec3 position = Vec3::Zero();
  /// Nominal speed for the leg that ends at this waypoint, m/s.
  double speed = 0.5;
  /// Stationary time after arrival, s.
  double dwell = 0.0;
};

/// Gimbal pitch set-point (positive tilts the receiver nose-down).
struct GimbalKnot {
  double time = 0.0;
  double pitch = 0.0;  // rad
};

/// Stop-and-turn route: the vehicle rotates in place to face each leg, then
/// drives it with smooth acceleration and deceleration ramps.
struct TrajectorySpec {
  std::vector<Waypoint> waypoints;
  std::vector<GimbalKnot> gimbal;
  /// Heading before the first leg. NaN means "face the first leg".
  double initial_heading = std::numeric_limits<double>::quiet_NaN();
  double initial_static = 0.0;  // s
  double end_hold = 0.0;        // s
  double ramp_time = 1.0;       // s, speed ramp at each end of a leg
  double turn_rate = 0.35;      // rad/s, peak in-place rotation rate
  double max_speed = 1.0;       // m/s
  double max_turn_rate = 0.5;   // rad/s

  void validate() const;
};

/// Continuous-time kinematic state; a is the u-frame acceleration.
struct KinematicPose {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Quat q = Quat::Identity();
};

/// Discrete truth at IMU rate. p, v and q are mutually consistent with a
/// forward-Euler mechanization driven by (accel, omega) held over each step.
struct TruthSample {
  double timestamp = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 accel = Vec3::Zero();  // u-frame, held over [t_i, t_{i+1})
  Vec3 omega = Vec3::Zero();  // v-frame, held over [t_i, t_{i+1})
};

class Trajectory {
 public:
  /// Throws ConfigError on fewer than two waypoints, vertical legs, or legs
  /// whose speed profile exceeds the limits.
  explicit Trajectory(const TrajectorySpec& spec);

  double duration() const { return duration_; }
  KinematicPose at(double t) const;
  /// Samples at `rate` and checks the angular-rate limit.
  std::vector<TruthSample> sample(double rate) const;
  const TrajectorySpec& spec() const { return spec_; }

 private:
  enum class PhaseKind { Hold, Turn, Move };
  struct Phase {
    PhaseKind kind = PhaseKind::Hold;
    double t0 = 0.0;
    double length = 0.0;  // duration
    Vec3 p0 = Vec3::Zero();
    Vec3 dir = Vec3::Zero();
    double distance = 0.0;
    double cruise = 0.0;
    double ramp = 0.0;
    double yaw0 = 0.0, yaw1 = 0.0;
    double pitch0 = 0.0, pitch1 = 0.0;
  };

  double gimbalPitch(double t) const;

  TrajectorySpec spec_;
  std::vector<Phase> phases_;
  double duration_ = 0.0;
};

/// Samples an arbitrary pose function into a mechanization-consistent stream.
std::vector<TruthSample> sampleTruth(const std::function<KinematicPose(double)>& pose, double duration,
                                     double rate);

/// Inertial sensor error model. Datasheet units in the JSON form; SI here.
struct ImuNoiseSpec {
  double velocity_random_walk = 0.0;  // m/s/√s
  double angle_random_walk = 0.0;     // rad/√s
  double accel_bias_instability = 0.0;  // m/s²
  double gyro_bias_instability = 0.0;   // rad/s
  double bias_correlation_time = 100.0; // s
  Vec3 initial_accel_bias = Vec3::Zero();  // b-frame
  Vec3 initial_gyro_bias = Vec3::Zero();   // b-frame

  /// Honeywell HGuide i300 datasheet values.
  static ImuNoiseSpec hguideI300();
  ImuNoiseSpec scaled(double factor) const;
  /// Matching white-noise and bias-walk densities for the estimator.
  ImuNoiseDensity density() const;
};

struct RssNoiseSpec {
  double sigma = 0.1;      // epoch value, 1-σ
  double raw_sigma = 0.1;  // raw sample, 1-σ
};

struct BlockageInterval {
  int led_id = 0;
  double start = 0.0;
  double end = 0.0;
};

struct SampleRates {
  double imu = 200.0;
  double raw_rss = 120.0;
  double epoch = 1.0;
  /// Averaging window of one epoch value, centred on the epoch time.
  double epoch_window = 0.5;

  void validate() const;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  Room room;
  std::vector<LedBeacon> leds;
  ReceiverConfig receiver;
  TrajectorySpec trajectory;
  ImuNoiseSpec imu;
  RssNoiseSpec rss;
  std::vector<BlockageInterval> blockages;
  SampleRates rates;
  Vec3 gravity = kDefaultGravity;

  void validate() const;
};

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);
Scenario loadScenario(const std::filesystem::path& path);

/// Named fixtures: sim3d, sim3d_clean, expA, expA_clean, expA_level, expA_normal.
Scenario referenceScenario(const std::string& name);
std::vector<std::string> referenceScenarioNames();

struct ImuSynthesis {
  std::vector<ImuSample> samples;
  /// True b-frame biases at each sample.
  std::vector<ImuBias> bias;
};

ImuSynthesis synthesizeImu(std::span<const TruthSample> truth, const ImuNoiseSpec& noise,
                           const Dcm& R_b_to_v, const Vec3& gravity, std::uint64_t seed);

/// Fraction of (t − w/2, t + w/2] covered by the LED's blockage intervals.
double blockedFraction(std::span<const BlockageInterval> schedule, int led_id, double t, double window);
bool blockedAt(std::span<const BlockageInterval> schedule, int led_id, double t);

struct RssSynthesis {
  std::vector<RawRssSample> raw;
  /// Epoch values with ground-truth flags and the configured variance.
  std::vector<RssSample> epochs;
};

/// Raw samples use the continuous pose; epoch values use the truth sample
/// at the epoch time scaled by the unblocked fraction of the window.
RssSynthesis synthesizeRss(const Trajectory& traj, std::span<const TruthSample> truth,
                           const Scenario& sc, std::uint64_t seed);

/// Converts a truth sample into a NavState with the given v-frame biases.
NavState toNavState(const TruthSample& s, const ImuBias& bias_b, const Dcm& R_b_to_v);

}  // namespace vlpins
