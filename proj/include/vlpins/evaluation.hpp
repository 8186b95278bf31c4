#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlpins/blockage.hpp"
#include "vlpins/dataset.hpp"
#include "vlpins/estimator.hpp"
#include "vlpins/pipeline.hpp"
#include "vlpins/simulator.hpp"

namespace vlpins {

struct ErrorStats {
  int samples = 0;
  double mean_2d = 0.0, max_2d = 0.0, rms_2d = 0.0;  // m
  double mean_3d = 0.0, max_3d = 0.0, rms_3d = 0.0;  // m
  /// Angle between the vertical seen in the estimated and true v-frames.
  double mean_inclination_deg = 0.0, max_inclination_deg = 0.0;
  double mean_roll_deg = 0.0, mean_pitch_deg = 0.0;
  double mean_heading_deg = 0.0, max_heading_deg = 0.0;
};

struct CdfPoint {
  double error = 0.0;     // m
  double fraction = 0.0;  // of samples with error ≤ this value
};

struct DetectionScore {
  int truth_intervals = 0;  // with raw coverage
  int recalled = 0;
  int detections = 0;  // maximal blocked runs
  int true_detections = 0;
  int false_transitions = 0;
  double recall = 1.0;
  double precision = 1.0;
  int truth_blocked_epochs = 0;
  int flagged_blocked_epochs = 0;
  int correct_blocked_epochs = 0;
};

struct LedLocationError {
  int id = 0;
  Vec2 estimate = Vec2::Zero();
  Vec2 truth = Vec2::Zero();
  double error = 0.0;
  double max_covariance = 0.0;
  bool flagged = false;
  double dop = 0.0;
};

/// Metrics of one estimated trajectory against time-aligned ground truth.
struct RunReport {
  std::string mode;
  std::string trajectory;  // "causal" or "smoothed"
  int epochs = 0;
  int nonconverged_epochs = 0;
  int vlp_failures = 0;
  bool flagged = false;
  ErrorStats errors;
  std::optional<ErrorStats> smoothed;
  std::vector<CdfPoint> cdf_2d;
  std::vector<CdfPoint> cdf_3d;
  std::optional<DetectionScore> detection;
  std::vector<LedLocationError> leds;
  /// Wall-clock time; kept out of the JSON so reports stay reproducible.
  double runtime_s = 0.0;
};

/// Pairs each estimate with the nearest truth sample within max_skew.
/// Throws ConfigError when no estimate has a match.
std::vector<std::pair<const NavState*, const NavState*>> alignToTruth(std::span<const NavState> est,
                                                                      std::span<const NavState> truth,
                                                                      double max_skew = 1e-3);

ErrorStats computeErrors(std::span<const NavState> est, std::span<const NavState> truth, double max_skew = 1e-3);
/// Empirical CDF with one point per distinct error value, ending at 1.
std::vector<CdfPoint> empiricalCdf(std::vector<double> errors);
std::vector<double> positionErrors(std::span<const NavState> est, std::span<const NavState> truth, bool planar,
                                   double max_skew = 1e-3);

/// Interval-level recall and precision of the raw-rate detector plus
/// epoch-level agreement with the ground-truth labels.
DetectionScore scoreDetection(std::span<const TaggedRawSample> tagged, std::span<const BlockageInterval> schedule,
                              std::span<const RssSample> flagged_epochs, std::span<const RssSample> truth_epochs,
                              double raw_rate);

std::vector<LedLocationError> scoreLeds(std::span<const UnknownLedEstimate> est, std::span<const LedBeacon> truth);

/// Report of a run against the dataset truth; `truth_leds` scores unknown LEDs.
/// Errors use the causal stream, `smoothed` the final window contents.
RunReport makeReport(const RunResult& r, const Dataset& d, std::span<const LedBeacon> truth_leds,
                     double runtime_s = 0.0);

void to_json(nlohmann::json& j, const ErrorStats& e);
void from_json(const nlohmann::json& j, ErrorStats& e);
void to_json(nlohmann::json& j, const RunReport& r);
void from_json(const nlohmann::json& j, RunReport& r);

/// kind,error_m,fraction rows for the 2-D and 3-D CDFs.
std::string cdfCsv(const RunReport& r);

}  // namespace vlpins
