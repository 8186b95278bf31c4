#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "vlpins/factors.hpp"
#include "vlpins/nls.hpp"
#include "vlpins/preint.hpp"

namespace vlpins {

enum class BlockedPolicy { DownWeight, Exclude };

struct InitialSigmas {
  double position = 0.5;       // m
  double velocity = 0.05;      // m/s
  double tilt = 0.02;          // rad, roll and pitch
  double heading = 0.02;       // rad
  double accel_bias = 0.02;    // m/s^2
  double gyro_bias = 2e-3;     // rad/s
};

struct EstimatorConfig {
  int window = 20;
  int window_unknown_leds = 50;
  ConstraintConfig constraints;
  double rss_sigma = 0.1;
  /// Variance given to BLOCKED and OUT_OF_FOV samples.
  double blocked_variance = 99.0;
  BlockedPolicy blocked_policy = BlockedPolicy::DownWeight;
  ImuNoiseDensity imu_noise;
  nls::LmOptions lm;
  InitialSigmas initial;
  Vec3 gravity = kDefaultGravity;
  std::vector<int> unknown_leds;
  double unknown_led_prior_sigma = 2.0;      // m
  double unknown_led_cov_threshold = 1.0;    // m^2, largest eigenvalue
  double unknown_led_max_shift = 3.0;        // m from the initial guess
  /// Window geometry DOP above which an estimate is reported unreliable.
  double unknown_led_max_dop = 10.0;

  int effectiveWindow() const { return unknown_leds.empty() ? window : window_unknown_leds; }
  void validate() const;
};

void to_json(nlohmann::json& j, const EstimatorConfig& c);
void from_json(const nlohmann::json& j, EstimatorConfig& c);
EstimatorConfig loadEstimatorConfig(const std::filesystem::path& path);

struct PositionFix {
  Vec3 pd_position = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
};

struct UnknownLedEstimate {
  int id = 0;
  Vec2 initial = Vec2::Zero();
  Vec2 position = Vec2::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
  bool diverged = false;
  /// Diverged or too uncertain to trust.
  bool flagged = false;
  double dop = std::numeric_limits<double>::infinity();
};

struct EpochDiagnostics {
  double timestamp = 0.0;
  double initial_cost = 0.0;
  double cost = 0.0;
  int iterations = 0;
  bool converged = true;
  int los_count = 0;
  int down_weighted = 0;
  std::map<int, double> led_dop;
};

/// Geometric DOP of unit directions from each point to the LED; +inf when
/// the geometry is rank deficient.
double dop(std::span<const Vec2> points, const Vec2& led);

/// Roll and pitch from the mean specific force of a static interval, heading given.
Quat levelAttitude(std::span<const ImuSample> static_samples, const Dcm& R_b_to_v, double heading);

/// Samples covering [t0, t1): the sample active at t0 is re-stamped to t0.
std::vector<ImuSample> imuSlice(std::span<const ImuSample> stream, double t0, double t1);

/// Sliding-window tightly coupled estimator. One owner mutates it at a time.
class SlidingWindowEstimator {
 public:
  SlidingWindowEstimator(EstimatorConfig cfg, std::vector<LedBeacon> leds, ReceiverConfig rx);

  /// Seeds the window with x0 under the configured prior and solves the first epoch.
  EpochDiagnostics initialize(const NavState& x0, std::span<const RssSample> rss,
                              std::span<const PositionFix> fixes = {});
  /// IMU mechanization of the latest state up to t (does not change the window).
  NavState predict(double t, std::span<const ImuSample> imu) const;
  /// Appends an epoch, slides/marginalizes when full, and re-solves.
  EpochDiagnostics addEpoch(double t, std::span<const ImuSample> imu, std::span<const RssSample> rss,
                            std::span<const PositionFix> fixes = {});

  bool initialized() const { return !window_.empty(); }
  NavState latest() const;
  std::vector<NavState> windowStates() const;
  /// States already marginalized (final values) followed by the current window.
  std::vector<NavState> smoothed() const;
  std::vector<UnknownLedEstimate> unknownLeds() const;

  /// Normal equations of the current window.
  nls::LinearSystem assemble() const { return graph_.linearize(); }
  const nls::Graph& graph() const { return graph_; }
  const EstimatorConfig& config() const { return cfg_; }
  const ReceiverConfig& receiver() const { return rx_; }
  const std::vector<LedBeacon>& leds() const { return leds_; }

 private:
  struct Slot {
    int block;
    double timestamp;
  };

  int addState(const NavState& x);
  void addMeasurements(int block, double t, std::span<const RssSample> rss,
                       std::span<const PositionFix> fixes, EpochDiagnostics& diag);
  void slide();
  EpochDiagnostics solve(EpochDiagnostics diag);
  NavState stateOf(const Slot& s) const;

  EstimatorConfig cfg_;
  std::vector<LedBeacon> leds_;
  ReceiverConfig rx_;
  nls::Graph graph_;
  std::vector<Slot> window_;
  std::vector<NavState> finalized_;
  std::map<int, int> led_blocks_;  // LED id -> block id
  std::map<int, Vec2> led_initial_;
  std::map<int, bool> led_diverged_;
};

}  // namespace vlpins
