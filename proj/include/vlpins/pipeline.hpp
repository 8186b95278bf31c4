#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlpins/blockage.hpp"
#include "vlpins/dataset.hpp"
#include "vlpins/estimator.hpp"
#include "vlpins/vlp_fix.hpp"

namespace vlpins {

enum class RunMode { TightlyCoupled, LooselyCoupled, VlpOnly };

std::string toString(RunMode m);
/// Accepts TC, LC and VLP_ONLY (case-insensitive).
RunMode runModeFromString(const std::string& s);

/// Options of one estimation run: the estimator block plus blockage
/// detection and the reference baselines.
struct RunConfig {
  EstimatorConfig estimator;
  DrdConfig drd;
  bool use_drd = true;
  /// VLP_ONLY also solves pitch and yaw instead of assuming a level PD.
  bool vlp_tilt = false;
  /// Floor on the standard deviation of LC position fixes, m.
  double lc_min_fix_sigma = 0.02;
  /// Epoch values below this are treated as out of view.
  double epoch_min_signal = 0.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Estimator keys at the top level, plus "drd" and "baseline" objects.
void from_json(const nlohmann::json& j, RunConfig& c);
RunConfig loadRunConfig(const std::filesystem::path& path);

/// Defaults suited to a scenario: 3-D runs use both NHC axes, runs with a
/// tilting gimbal on a flat floor use the height constraint and lateral NHC.
RunConfig defaultRunConfig(const Scenario& sc);
/// Scenario defaults with a user config JSON merge-patched on top.
RunConfig resolveRunConfig(const Scenario& sc, const nlohmann::json& user = nlohmann::json::object());

/// Receiver pose used to bound the RSS change rate.
struct PoseHint {
  bool valid = false;
  Vec3 pd_position = Vec3::Zero();
  Quat attitude = Quat::Identity();
};

/// Streams raw RSS through the detector up to each epoch's window end and
/// assigns epoch flags. Ground-truth flags in the dataset are ignored.
class EpochFlagger {
 public:
  /// `leds` is the map the run works with (initial guesses for unknown LEDs).
  EpochFlagger(const Dataset& d, const RunConfig& cfg, std::vector<LedBeacon> leds);

  /// Epoch times with at least one RSS value.
  const std::vector<double>& epochTimes() const { return times_; }
  /// Flagged samples of the epoch at t; the pose bounds the change rate.
  std::vector<RssSample> epoch(double t, const PoseHint& hint);
  const std::vector<TaggedRawSample>& tagged() const { return tagged_; }

 private:
  double threshold(const LedBeacon& led, const PoseHint& hint) const;

  const Dataset& data_;
  RunConfig cfg_;
  std::vector<LedBeacon> leds_;
  DrdDetector detector_;
  std::vector<double> times_;
  std::map<double, std::vector<RssSample>> by_time_;
  std::size_t next_raw_ = 0;
  std::vector<TaggedRawSample> tagged_;
};

struct RunResult {
  RunMode mode = RunMode::TightlyCoupled;
  /// Last state of the window after each epoch (real-time output).
  std::vector<NavState> causal;
  /// Final window contents after the last epoch (TC and LC only).
  std::vector<NavState> smoothed;
  std::vector<EpochDiagnostics> diagnostics;
  std::vector<RssSample> flagged;
  std::vector<TaggedRawSample> tagged;
  std::vector<UnknownLedEstimate> unknown_leds;
  int vlp_failures = 0;
};

/// `leds` overrides the dataset's map, e.g. with perturbed initial guesses.
RunResult runEstimation(const Dataset& d, const RunConfig& cfg, RunMode mode,
                        std::optional<std::vector<LedBeacon>> leds = std::nullopt);

}  // namespace vlpins
