#include "vlpins/blockage.hpp"

#include <algorithm>
#include <cmath>

#include "vlpins/errors.hpp"

namespace vlpins {

void DrdConfig::validate() const {
  if (!(sample_rate >= 100.0)) throw ConfigError("DRD needs raw RSS sampled at >= 100 Hz");
  if (!(v_max > 0.0)) throw ConfigError("DRD v_max must be positive");
  if (!(omega_max >= 0.0)) throw ConfigError("DRD omega_max must be non-negative");
  if (!(ratio_floor > 0.0)) throw ConfigError("DRD ratio floor must be positive");
  if (!(recover_fraction >= 0.0 && recover_fraction <= 1.0))
    throw ConfigError("DRD recover fraction must lie in [0, 1]");
}

std::string toString(BlockageTag tag) {
  return tag == BlockageTag::Blocked ? "BLOCKED" : "UNBLOCKED";
}

BlockageTag blockageTagFromString(const std::string& s) {
  if (s == "BLOCKED") return BlockageTag::Blocked;
  if (s == "UNBLOCKED") return BlockageTag::Unblocked;
  throw ConfigError("unknown blockage tag '" + s + "'");
}

namespace blockage {

double rateRatio(double p_i, double p_next, double dt, double floor) {
  if (!(dt > 0.0)) throw UndefinedRatio("rate ratio needs dt > 0");
  if (!(p_i > floor)) throw UndefinedRatio("rate ratio reference at or below floor");
  return (p_next - p_i) / (dt * p_i);
}

double threshold3d(const Vec3& pd_pos, const Quat& q, const LedBeacon& led, const DrdConfig& cfg) {
  const LosGeometry g = channel::losGeometry(pd_pos, q, led);
  if (g.cos_psi <= channel::kMinCosine || g.cos_theta <= channel::kMinCosine)
    throw NearSingular("grazing geometry in DRD threshold");
  const Vec3& n = g.receiver_normal;
  const double attitude_term = g.d_vec.cross(n).norm() / g.d_vec.dot(n);
  return attitude_term * cfg.omega_max + channel::positionBracket(g, led).norm() * cfg.v_max;
}

double threshold2d(double s, double h, double lambertian_order, double v_max) {
  return (3.0 + lambertian_order) * s * v_max / (s * s + h * h);
}

double planarWorstCaseThreshold(const LedBeacon& led, const Vec2& footprint_min,
                                const Vec2& footprint_max, double pd_height, const DrdConfig& cfg) {
  const double h = led.position.z() - pd_height;
  if (!(h > 0.0)) throw ConfigError("LED must sit above the receiver for the planar threshold");
  const Vec2 s_led = led.position.head<2>();
  const Vec2 nearest = s_led.cwiseMax(footprint_min).cwiseMin(footprint_max);
  const double s_min = (nearest - s_led).norm();
  double s_max = 0.0;
  for (double x : {footprint_min.x(), footprint_max.x()})
    for (double y : {footprint_min.y(), footprint_max.y()})
      s_max = std::max(s_max, (Vec2(x, y) - s_led).norm());
  const double s_worst = std::clamp(h, s_min, s_max);
  return threshold2d(s_worst, h, led.lambertian_order, cfg.v_max) + cfg.omega_max * s_max / h;
}

LedBlockageState drdStep(const LedBlockageState& state, double p_i, double p_next, double dt,
                         double threshold, const DrdConfig& cfg) {
  if (!(threshold > 0.0)) throw ConfigError("DRD threshold must be positive");
  LedBlockageState next = state;
  const auto toggle = [&](BlockageTag tag) {
    next.tag = tag;
    ++next.counter;
  };

  if (state.tag == BlockageTag::Unblocked) {
    if (!(p_i > cfg.ratio_floor)) {
      toggle(BlockageTag::Blocked);
      return next;
    }
    if (p_i < cfg.min_signal) return next;
    if (rateRatio(p_i, p_next, dt, cfg.ratio_floor) < -threshold) {
      toggle(BlockageTag::Blocked);
      next.reference_level = p_i;
    } else {
      next.reference_level = p_next;
    }
    return next;
  }

  const bool recovered = p_next > cfg.ratio_floor &&
                         p_next >= cfg.recover_fraction * state.reference_level;
  if (!(p_i > cfg.ratio_floor)) {
    // Rise from an empty reading: the ratio is unbounded.
    if (recovered) toggle(BlockageTag::Unblocked);
    return next;
  }
  if (recovered && rateRatio(p_i, p_next, dt, cfg.ratio_floor) > threshold)
    toggle(BlockageTag::Unblocked);
  return next;
}

std::vector<RssSample> annotateEpochs(std::span<const TaggedRawSample> raw,
                                      std::span<const RssSample> epochs, double window,
                                      double raw_rate, double min_signal) {
  std::map<int, std::vector<const TaggedRawSample*>> by_led;
  for (const auto& s : raw) by_led[s.led_id].push_back(&s);

  const double expected = window * raw_rate;
  std::vector<RssSample> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) {
    RssSample a = e;
    int count = 0;
    bool blocked = false;
    if (auto it = by_led.find(e.led_id); it != by_led.end()) {
      const auto& list = it->second;
      const double lo = e.timestamp - 0.5 * window;
      auto first = std::lower_bound(list.begin(), list.end(), lo,
                                    [](const TaggedRawSample* s, double t) { return s->timestamp < t; });
      for (auto p = first; p != list.end() && (*p)->timestamp <= e.timestamp + 0.5 * window + 1e-9; ++p) {
        if (!inEpochWindow((*p)->timestamp, e.timestamp, window)) continue;
        ++count;
        blocked = blocked || (*p)->tag == BlockageTag::Blocked;
      }
    }
    if (count < 0.9 * expected)
      a.flag = RssFlag::OutOfFov;
    else if (blocked)
      a.flag = RssFlag::Blocked;
    else if (a.value < min_signal)
      a.flag = RssFlag::OutOfFov;
    else
      a.flag = RssFlag::Los;
    out.push_back(a);
  }
  return out;
}

}  // namespace blockage

DrdDetector::DrdDetector(DrdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

TaggedRawSample DrdDetector::push(const RawRssSample& s, double threshold) {
  auto& st = states_[s.led_id];
  if (auto it = previous_.find(s.led_id); it != previous_.end()) {
    const double dt = s.timestamp - it->second.timestamp;
    if (dt > 0.0) st = blockage::drdStep(st, it->second.value, s.value, dt, threshold, cfg_);
    it->second = s;
  } else {
    previous_.emplace(s.led_id, s);
    st.reference_level = s.value;
  }
  return {s.timestamp, s.led_id, s.value, st.tag, st.counter};
}

LedBlockageState DrdDetector::state(int led_id) const {
  auto it = states_.find(led_id);
  return it == states_.end() ? LedBlockageState{} : it->second;
}

}  // namespace vlpins
