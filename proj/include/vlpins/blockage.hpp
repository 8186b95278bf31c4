#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "vlpins/channel.hpp"

namespace vlpins {

/// High-rate RSS sample, before epoch down-sampling.
struct RawRssSample {
  double timestamp = 0.0;
  int led_id = 0;
  double value = 0.0;
};

enum class DrdMode { Full3d, Planar };

struct DrdConfig {
  double v_max = 1.0;      // m/s
  double omega_max = 0.5;  // rad/s
  double sample_rate = 120.0;
  DrdMode mode = DrdMode::Full3d;
  /// Reference values at or below this floor make the rate ratio undefined.
  double ratio_floor = 1e-12;
  /// A rise only ends a blockage once the signal is back above this
  /// fraction of the level seen just before the descent.
  double recover_fraction = 0.25;
  /// Pairs whose reference sample lies in (ratio_floor, min_signal) carry
  /// too little SNR for a decision and leave the state unchanged.
  double min_signal = 0.0;

  void validate() const;
};

enum class BlockageTag { Unblocked, Blocked };

std::string toString(BlockageTag tag);
BlockageTag blockageTagFromString(const std::string& s);

struct LedBlockageState {
  BlockageTag tag = BlockageTag::Unblocked;
  /// Number of transitions so far; odd while blocked.
  int counter = 0;
  double reference_level = 0.0;
};

struct TaggedRawSample {
  double timestamp = 0.0;
  int led_id = 0;
  double value = 0.0;
  BlockageTag tag = BlockageTag::Unblocked;
  int counter = 0;
};

namespace blockage {

/// (p_next − p_i) / (dt·p_i). Throws UndefinedRatio when p_i ≤ floor.
double rateRatio(double p_i, double p_next, double dt, double floor = 1e-12);

/// Bound on |P'/P| for a vehicle moving at most v_max and turning at most omega_max.
double threshold3d(const Vec3& pd_pos, const Quat& q, const LedBeacon& led, const DrdConfig& cfg);

/// Level receiver at horizontal distance s and height difference h.
double threshold2d(double s, double h, double lambertian_order, double v_max);

/// Pose-free threshold: threshold2d maximised over every horizontal distance
/// the footprint allows, plus omega_max·tan ψ at the farthest corner.
double planarWorstCaseThreshold(const LedBeacon& led, const Vec2& footprint_min,
                                const Vec2& footprint_max, double pd_height, const DrdConfig& cfg);

/// One step of the descending/rising state machine.
LedBlockageState drdStep(const LedBlockageState& state, double p_i, double p_next, double dt,
                         double threshold, const DrdConfig& cfg);

/// Epoch averaging window (t − w/2, t + w/2].
inline bool inEpochWindow(double sample_t, double epoch_t, double window) {
  return sample_t > epoch_t - 0.5 * window + 1e-9 && sample_t <= epoch_t + 0.5 * window + 1e-9;
}

/// Flags each epoch sample BLOCKED when any raw sample of that LED inside its
/// window is blocked, OUT_OF_FOV when raw coverage is missing or the epoch
/// value sits below min_signal, LOS otherwise.
std::vector<RssSample> annotateEpochs(std::span<const TaggedRawSample> raw,
                                      std::span<const RssSample> epochs, double window,
                                      double raw_rate, double min_signal);

}  // namespace blockage

/// Per-LED detectors fed one raw sample at a time.
class DrdDetector {
 public:
  explicit DrdDetector(DrdConfig cfg);

  /// Steps the LED's state machine on (previous sample, s).
  TaggedRawSample push(const RawRssSample& s, double threshold);

  LedBlockageState state(int led_id) const;
  const DrdConfig& config() const { return cfg_; }

 private:
  DrdConfig cfg_;
  std::map<int, LedBlockageState> states_;
  std::map<int, RawRssSample> previous_;
};

}  // namespace vlpins
