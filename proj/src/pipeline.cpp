#include "vlpins/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "vlpins/errors.hpp"
#include "vlpins/json_util.hpp"

namespace vlpins {

std::string toString(RunMode m) {
  switch (m) {
    case RunMode::TightlyCoupled: return "TC";
    case RunMode::LooselyCoupled: return "LC";
    case RunMode::VlpOnly: return "VLP_ONLY";
  }
  return "TC";
}

RunMode runModeFromString(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "TC") return RunMode::TightlyCoupled;
  if (u == "LC") return RunMode::LooselyCoupled;
  if (u == "VLP_ONLY" || u == "VLP") return RunMode::VlpOnly;
  throw ConfigError("unknown mode '" + s + "' (expected TC, LC or VLP_ONLY)");
}

void RunConfig::validate() const {
  estimator.validate();
  drd.validate();
  if (!(lc_min_fix_sigma > 0.0)) throw ConfigError("lc_min_fix_sigma must be positive");
  if (!(epoch_min_signal >= 0.0)) throw ConfigError("epoch min_signal must be non-negative");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = c.estimator;
  j["drd"] = {{"enabled", c.use_drd},
              {"v_max", c.drd.v_max},
              {"omega_max", c.drd.omega_max},
              {"sample_rate", c.drd.sample_rate},
              {"mode", c.drd.mode == DrdMode::Planar ? "planar" : "full3d"},
              {"ratio_floor", c.drd.ratio_floor},
              {"recover_fraction", c.drd.recover_fraction},
              {"min_signal", c.drd.min_signal}};
  j["baseline"] = {{"vlp_tilt", c.vlp_tilt}, {"lc_min_fix_sigma", c.lc_min_fix_sigma}};
  j["epoch_gate"] = {{"min_signal", c.epoch_min_signal}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  using json_util::valueOr;
  c = RunConfig{};
  try {
    c.estimator = j.get<EstimatorConfig>();
    if (j.contains("drd")) {
      const auto& d = j.at("drd");
      c.use_drd = valueOr(d, "enabled", c.use_drd);
      c.drd.v_max = valueOr(d, "v_max", c.drd.v_max);
      c.drd.omega_max = valueOr(d, "omega_max", c.drd.omega_max);
      c.drd.sample_rate = valueOr(d, "sample_rate", c.drd.sample_rate);
      const std::string mode = valueOr<std::string>(d, "mode", "full3d");
      if (mode == "full3d")
        c.drd.mode = DrdMode::Full3d;
      else if (mode == "planar")
        c.drd.mode = DrdMode::Planar;
      else
        throw ConfigError("unknown drd mode '" + mode + "'");
      c.drd.ratio_floor = valueOr(d, "ratio_floor", c.drd.ratio_floor);
      c.drd.recover_fraction = valueOr(d, "recover_fraction", c.drd.recover_fraction);
      c.drd.min_signal = valueOr(d, "min_signal", c.drd.min_signal);
    }
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      c.vlp_tilt = valueOr(b, "vlp_tilt", c.vlp_tilt);
      c.lc_min_fix_sigma = valueOr(b, "lc_min_fix_sigma", c.lc_min_fix_sigma);
    }
    if (j.contains("epoch_gate")) c.epoch_min_signal = valueOr(j.at("epoch_gate"), "min_signal", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
}

RunConfig loadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in).get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

RunConfig defaultRunConfig(const Scenario& sc) {
  RunConfig c;
  auto& e = c.estimator;
  e.rss_sigma = std::max(sc.rss.sigma, 1e-6);
  e.imu_noise = sc.imu.density();
  e.gravity = sc.gravity;
  const bool tilting = !sc.trajectory.gimbal.empty();
  e.constraints.nhc_lateral = true;
  e.constraints.nhc_vertical = !tilting;
  e.constraints.height = tilting;
  c.drd.v_max = sc.trajectory.max_speed;
  c.drd.omega_max = sc.trajectory.max_turn_rate;
  c.drd.sample_rate = sc.rates.raw_rss;
  // Keeps the rate-ratio noise of the weakest accepted signal near 0.1 /s.
  c.drd.min_signal = 12.0 * sc.rss.raw_sigma * sc.rates.raw_rss;
  c.epoch_min_signal = 3.0 * sc.rss.sigma;
  c.vlp_tilt = tilting;
  return c;
}

RunConfig resolveRunConfig(const Scenario& sc, const nlohmann::json& user) {
  if (!user.is_object()) throw ConfigError("run config must be a JSON object");
  nlohmann::json j = defaultRunConfig(sc);
  j.merge_patch(user);
  return j.get<RunConfig>();
}

EpochFlagger::EpochFlagger(const Dataset& d, const RunConfig& cfg, std::vector<LedBeacon> leds)
    : data_(d), cfg_(cfg), leds_(std::move(leds)), detector_(cfg.drd) {
  for (const auto& s : d.rss_epoch) by_time_[s.timestamp].push_back(s);
  for (const auto& [t, v] : by_time_) times_.push_back(t);
  tagged_.reserve(d.rss_raw.size());
}

double EpochFlagger::threshold(const LedBeacon& led, const PoseHint& hint) const {
  const auto& sc = data_.scenario;
  const double planar = blockage::planarWorstCaseThreshold(led, sc.room.min.head<2>(), sc.room.max.head<2>(),
                                                           std::min(sc.receiver.pd_height, led.position.z() - 0.1),
                                                           cfg_.drd);
  if (!hint.valid || cfg_.drd.mode == DrdMode::Planar) return planar;
  try {
    return blockage::threshold3d(hint.pd_position, hint.attitude, led, cfg_.drd);
  } catch (const std::domain_error&) {
    return planar;
  }
}

std::vector<RssSample> EpochFlagger::epoch(double t, const PoseHint& hint) {
  const double w = data_.scenario.rates.epoch_window;
  std::vector<RssSample> samples;
  if (auto it = by_time_.find(t); it != by_time_.end()) samples = it->second;

  if (!cfg_.use_drd) {
    for (auto& s : samples) s.flag = s.value < cfg_.epoch_min_signal ? RssFlag::OutOfFov : RssFlag::Los;
    return samples;
  }

  std::map<int, double> thresholds;
  for (const auto& led : leds_) thresholds[led.id] = threshold(led, hint);
  const auto& raw = data_.rss_raw;
  while (next_raw_ < raw.size() && raw[next_raw_].timestamp <= t + 0.5 * w + 1e-9) {
    const auto& r = raw[next_raw_++];
    auto th = thresholds.find(r.led_id);
    if (th == thresholds.end()) continue;
    tagged_.push_back(detector_.push(r, th->second));
  }
  auto first = std::lower_bound(tagged_.begin(), tagged_.end(), t - 0.5 * w - 1e-6,
                                [](const TaggedRawSample& s, double x) { return s.timestamp < x; });
  const std::span<const TaggedRawSample> recent(tagged_.data() + (first - tagged_.begin()),
                                                static_cast<std::size_t>(tagged_.end() - first));
  return blockage::annotateEpochs(recent, samples, w, data_.scenario.rates.raw_rss, cfg_.epoch_min_signal);
}

namespace {

PoseHint hintOf(const NavState& x, const ReceiverConfig& rx) {
  return {true, pdPosition(x, rx), x.q};
}

struct Start {
  NavState state;
  std::vector<RssSample> flags;
  std::optional<VlpFix> fix;
};

VlpFixOptions fixOptions(const RunConfig& cfg, const ReceiverConfig& rx, const Quat& attitude) {
  VlpFixOptions o;
  o.solve_z = !cfg.estimator.constraints.height;
  o.fixed_z = rx.pd_height;
  o.attitude = attitude;
  return o;
}

// Stand-alone VLP solve: level PD, or pitch and yaw solved too.
VlpFixOptions vlpOptions(const RunConfig& cfg, const ReceiverConfig& rx) {
  VlpFixOptions o = fixOptions(cfg, rx, Quat::Identity());
  o.solve_tilt = cfg.vlp_tilt;
  return o;
}

// Mapped LEDs the fix predicts above the gate although the epoch reports
// them missing or out of view.
int visibilityConflicts(const VlpFix& f, std::span<const RssSample> flags, std::span<const LedBeacon> leds,
                        const ReceiverConfig& rx, double gate) {
  int n = 0;
  for (const auto& led : leds) {
    const auto s = std::find_if(flags.begin(), flags.end(), [&](const RssSample& x) { return x.led_id == led.id; });
    if (s != flags.end() && s->flag != RssFlag::OutOfFov) continue;
    const auto p = channel::predictRss(f.position, f.attitude, led, rx);
    if (p && *p > gate) ++n;
  }
  return n;
}

// Multi-start fix over the room footprint. Few LEDs leave mirror solutions,
// so candidates outside the room are dropped and the rest are ranked by
// visibility conflicts, then cost.
std::optional<VlpFix> globalFix(std::span<const RssSample> flags, std::span<const LedBeacon> leds,
                                const ReceiverConfig& rx, const Room& room, const VlpFixOptions& opt, double gate,
                                std::optional<Vec3> hint = std::nullopt) {
  constexpr int kGrid = 5;
  std::vector<Vec3> guesses;
  if (hint) guesses.push_back(*hint);
  guesses.push_back(rssCentroid(flags, leds, opt.fixed_z));
  for (int i = 0; i < kGrid; ++i)
    for (int k = 0; k < kGrid; ++k) {
      const Vec2 f((i + 0.5) / kGrid, (k + 0.5) / kGrid);
      const Vec2 xy = room.min.head<2>() + f.cwiseProduct(room.max.head<2>() - room.min.head<2>());
      guesses.emplace_back(xy.x(), xy.y(), opt.fixed_z);
    }
  std::optional<VlpFix> best;
  std::pair<int, double> best_score{0, 0.0};
  for (const auto& g : guesses) {
    auto f = solveVlpFix(flags, leds, rx, g, opt);
    if (!f || !room.contains(f->position, 1e-3)) continue;
    const std::pair<int, double> score{visibilityConflicts(*f, flags, leds, rx, gate), f->cost};
    if (!best || score < best_score) {
      best = f;
      best_score = score;
    }
  }
  return best;
}

// Level attitude from the IMU samples before the first epoch and a VLP fix
// at that attitude; velocity and biases start at zero.
Start initialState(const Dataset& d, const RunConfig& cfg, std::span<const LedBeacon> leds, EpochFlagger& flagger) {
  const auto& times = flagger.epochTimes();
  if (times.empty()) throw ConfigError("dataset has no RSS epochs");
  const double t0 = times.front();
  const auto& rx = d.scenario.receiver;
  std::vector<ImuSample> still;
  for (const auto& s : d.imu)
    if (s.timestamp <= t0) still.push_back(s);
  if (still.empty()) still.push_back(d.imu.front());

  Start st;
  st.flags = flagger.epoch(t0, PoseHint{});
  const Quat q0 = levelAttitude(still, rx.R_b_to_v, d.initialHeading());
  const Vec3 guess = rssCentroid(st.flags, leds, rx.pd_height);
  st.fix = globalFix(st.flags, leds, rx, d.scenario.room, fixOptions(cfg, rx, q0), cfg.epoch_min_signal);
  const Vec3 pd = st.fix ? st.fix->position : guess;
  st.state.timestamp = t0;
  st.state.q = q0;
  st.state.p = pd - q0.toRotationMatrix() * rx.leverArmV();
  return st;
}

PositionFix toPositionFix(const VlpFix& f, double min_sigma) {
  return {f.position, f.covariance + Mat3::Identity() * (min_sigma * min_sigma)};
}

RunResult runWindowed(const Dataset& d, const RunConfig& cfg, std::span<const LedBeacon> leds, bool tight) {
  RunResult out;
  out.mode = tight ? RunMode::TightlyCoupled : RunMode::LooselyCoupled;
  const auto& rx = d.scenario.receiver;
  EpochFlagger flagger(d, cfg, std::vector<LedBeacon>(leds.begin(), leds.end()));
  const Start st = initialState(d, cfg, leds, flagger);

  EstimatorConfig ec = cfg.estimator;
  if (!tight) ec.unknown_leds.clear();
  SlidingWindowEstimator est(ec, std::vector<LedBeacon>(leds.begin(), leds.end()), rx);

  auto record = [&](const EpochDiagnostics& diag, const std::vector<RssSample>& flags) {
    out.causal.push_back(est.latest());
    out.diagnostics.push_back(diag);
    out.flagged.insert(out.flagged.end(), flags.begin(), flags.end());
  };

  std::vector<PositionFix> fixes;
  if (!tight && st.fix) fixes.push_back(toPositionFix(*st.fix, cfg.lc_min_fix_sigma));
  record(est.initialize(st.state, tight ? std::span<const RssSample>(st.flags) : std::span<const RssSample>{}, fixes),
         st.flags);

  const auto& times = flagger.epochTimes();
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double t = times[k];
    const auto imu = imuSlice(d.imu, times[k - 1], t);
    if (imu.empty()) throw ConfigError("no IMU data between epochs at t = " + std::to_string(t));
    if (tight) {
      const auto flags = flagger.epoch(t, hintOf(est.latest(), rx));
      record(est.addEpoch(t, imu, flags), flags);
    } else {
      const NavState pred = est.predict(t, imu);
      const auto flags = flagger.epoch(t, hintOf(pred, rx));
      const auto fix = globalFix(flags, leds, rx, d.scenario.room, fixOptions(cfg, rx, pred.q),
                                 cfg.epoch_min_signal, pdPosition(pred, rx));
      fixes.clear();
      if (fix)
        fixes.push_back(toPositionFix(*fix, cfg.lc_min_fix_sigma));
      else
        ++out.vlp_failures;
      record(est.addEpoch(t, imu, {}, fixes), flags);
    }
  }
  out.smoothed = est.smoothed();
  out.unknown_leds = est.unknownLeds();
  out.tagged = flagger.tagged();
  return out;
}

// Per-epoch RSS-only fixes; the previous fix is held when an epoch has too
// few usable LEDs.
RunResult runVlpOnly(const Dataset& d, const RunConfig& cfg, std::span<const LedBeacon> leds) {
  RunResult out;
  out.mode = RunMode::VlpOnly;
  const auto& rx = d.scenario.receiver;
  EpochFlagger flagger(d, cfg, std::vector<LedBeacon>(leds.begin(), leds.end()));
  const Vec3 lever = rx.leverArmV();

  std::optional<NavState> last;
  PoseHint hint;
  for (double t : flagger.epochTimes()) {
    const auto flags = flagger.epoch(t, hint);
    const Vec3 guess = hint.valid ? hint.pd_position : rssCentroid(flags, leds, rx.pd_height);
    const auto fix = globalFix(flags, leds, rx, d.scenario.room, vlpOptions(cfg, rx), cfg.epoch_min_signal,
                               hint.valid ? std::optional<Vec3>(guess) : std::nullopt);
    EpochDiagnostics diag;
    diag.timestamp = t;
    NavState x;
    if (fix) {
      x.timestamp = t;
      x.q = fix->attitude;
      x.p = fix->position - x.q.toRotationMatrix() * lever;
      diag.cost = fix->cost;
      diag.los_count = fix->used;
      hint = {true, fix->position, fix->attitude};
      last = x;
    } else {
      ++out.vlp_failures;
      diag.converged = false;
      if (last) {
        x = *last;
      } else {
        x.p = guess - lever;
      }
      x.timestamp = t;
    }
    out.causal.push_back(x);
    out.diagnostics.push_back(diag);
    out.flagged.insert(out.flagged.end(), flags.begin(), flags.end());
  }
  out.tagged = flagger.tagged();
  return out;
}

}  // namespace

RunResult runEstimation(const Dataset& d, const RunConfig& cfg, RunMode mode,
                        std::optional<std::vector<LedBeacon>> leds) {
  cfg.validate();
  const std::vector<LedBeacon> map = leds ? *leds : d.scenario.leds;
  for (int id : cfg.estimator.unknown_leds)
    if (!findLed(map, id)) throw ConfigError("unknown LED id " + std::to_string(id) + " is not in the LED map");
  switch (mode) {
    case RunMode::TightlyCoupled: return runWindowed(d, cfg, map, true);
    case RunMode::LooselyCoupled: return runWindowed(d, cfg, map, false);
    case RunMode::VlpOnly: return runVlpOnly(d, cfg, map);
  }
  return {};
}

}  // namespace vlpins
