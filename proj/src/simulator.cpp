#include "vlpins/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "vlpins/errors.hpp"
#include "vlpins/json_util.hpp"

namespace vlpins {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMilliG = 9.80665e-3;

// Quintic smoothstep with zero first and second derivatives at both ends.
double smooth(double x) { return x * x * x * (10.0 + x * (-15.0 + 6.0 * x)); }
double smoothRate(double x) { return 30.0 * x * x * (1.0 - x) * (1.0 - x); }
// ∫₀ˣ smooth.
double smoothIntegral(double x) { return x * x * x * x * (2.5 + x * (-3.0 + x)); }
// Peak of smoothRate.
constexpr double kSmoothPeak = 1.875;

double wrapAngle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

std::mt19937_64 streamEngine(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

enum Stream : std::uint32_t { kImuWhite = 1, kImuBias = 2, kRssRaw = 3, kRssEpoch = 4 };

}  // namespace

bool Room::contains(const Vec3& p, double tol) const {
  return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
}

void TrajectorySpec::validate() const {
  if (waypoints.size() < 2) throw ConfigError("trajectory needs at least two waypoints");
  if (!(max_speed > 0.0) || !(max_turn_rate > 0.0)) throw ConfigError("trajectory limits must be positive");
  if (!(turn_rate > 0.0) || turn_rate > max_turn_rate)
    throw ConfigError("turn_rate must lie in (0, max_turn_rate]");
  if (!(ramp_time > 0.0)) throw ConfigError("ramp_time must be positive");
  if (initial_static < 0.0 || end_hold < 0.0) throw ConfigError("hold times must be non-negative");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (waypoints[i].dwell < 0.0) throw ConfigError("waypoint dwell must be non-negative");
    if (i > 0 && !(waypoints[i].speed > 0.0)) throw ConfigError("waypoint speed must be positive");
    if (waypoints[i].speed > max_speed)
      throw ConfigError("waypoint " + std::to_string(i) + " speed exceeds max_speed");
  }
  for (std::size_t i = 1; i < gimbal.size(); ++i)
    if (!(gimbal[i].time > gimbal[i - 1].time)) throw ConfigError("gimbal knots must be time-ordered");
}

Trajectory::Trajectory(const TrajectorySpec& spec) : spec_(spec) {
  spec_.validate();
  const auto& wp = spec_.waypoints;

  double yaw = spec_.initial_heading;
  if (std::isnan(yaw)) {
    yaw = 0.0;
    for (std::size_t i = 1; i < wp.size(); ++i) {
      const Vec3 d = wp[i].position - wp[i - 1].position;
      if (d.head<2>().norm() > 1e-9) {
        yaw = std::atan2(d.y(), d.x());
        break;
      }
    }
  }
  double pitch = 0.0;
  Vec3 pos = wp[0].position;
  double t = 0.0;

  auto hold = [&](double length) {
    if (length <= 0.0) return;
    Phase ph;
    ph.kind = PhaseKind::Hold;
    ph.t0 = t;
    ph.length = length;
    ph.p0 = pos;
    ph.yaw0 = ph.yaw1 = yaw;
    ph.pitch0 = ph.pitch1 = pitch;
    phases_.push_back(ph);
    t += length;
  };

  hold(spec_.initial_static);
  hold(wp[0].dwell);
  for (std::size_t i = 1; i < wp.size(); ++i) {
    const Vec3 d = wp[i].position - pos;
    const double dist = d.norm();
    if (dist > 1e-9) {
      const double horizontal = d.head<2>().norm();
      if (horizontal < 1e-9) throw ConfigError("leg " + std::to_string(i) + " is vertical");
      const double yaw1 = yaw + wrapAngle(std::atan2(d.y(), d.x()) - yaw);
      const double pitch1 = -std::atan2(d.z(), horizontal);
      const double sweep = std::max(std::abs(yaw1 - yaw), std::abs(pitch1 - pitch));
      if (sweep > 1e-12) {
        Phase ph;
        ph.kind = PhaseKind::Turn;
        ph.t0 = t;
        ph.length = kSmoothPeak * sweep / spec_.turn_rate;
        ph.p0 = pos;
        ph.yaw0 = yaw;
        ph.yaw1 = yaw1;
        ph.pitch0 = pitch;
        ph.pitch1 = pitch1;
        phases_.push_back(ph);
        t += ph.length;
        yaw = yaw1;
        pitch = pitch1;
      }
      Phase ph;
      ph.kind = PhaseKind::Move;
      ph.t0 = t;
      ph.length = dist / wp[i].speed;
      ph.p0 = pos;
      ph.dir = d / dist;
      ph.distance = dist;
      ph.ramp = std::min(spec_.ramp_time, 0.5 * ph.length);
      ph.cruise = dist / (ph.length - ph.ramp);
      // The smooth ramp peaks at the cruise speed, reached mid-leg at worst.
      if (ph.cruise > spec_.max_speed * (1.0 + 1e-12))
        throw ConfigError("leg " + std::to_string(i) + " cruise speed exceeds max_speed");
      ph.yaw0 = ph.yaw1 = yaw;
      ph.pitch0 = ph.pitch1 = pitch;
      phases_.push_back(ph);
      t += ph.length;
      pos = wp[i].position;
    }
    hold(wp[i].dwell);
  }
  hold(spec_.end_hold);
  duration_ = t;
}

double Trajectory::gimbalPitch(double t) const {
  const auto& g = spec_.gimbal;
  if (g.empty()) return 0.0;
  if (t <= g.front().time) return g.front().pitch;
  if (t >= g.back().time) return g.back().pitch;
  auto it = std::upper_bound(g.begin(), g.end(), t, [](double x, const GimbalKnot& k) { return x < k.time; });
  const GimbalKnot& b = *it;
  const GimbalKnot& a = *(it - 1);
  return a.pitch + (b.pitch - a.pitch) * smooth((t - a.time) / (b.time - a.time));
}

KinematicPose Trajectory::at(double t) const {
  KinematicPose out;
  double yaw = 0.0, pitch = 0.0;
  if (phases_.empty()) {
    out.p = spec_.waypoints.front().position;
    yaw = std::isnan(spec_.initial_heading) ? 0.0 : spec_.initial_heading;
  } else {
    t = std::clamp(t, 0.0, duration_);
    auto it = std::upper_bound(phases_.begin(), phases_.end(), t,
                               [](double x, const Phase& p) { return x < p.t0; });
    const Phase& ph = *(it == phases_.begin() ? it : it - 1);
    const double tau = std::clamp(t - ph.t0, 0.0, ph.length);
    out.p = ph.p0;
    yaw = ph.yaw0;
    pitch = ph.pitch0;
    if (ph.kind == PhaseKind::Turn) {
      const double s = smooth(tau / ph.length);
      yaw = ph.yaw0 + (ph.yaw1 - ph.yaw0) * s;
      pitch = ph.pitch0 + (ph.pitch1 - ph.pitch0) * s;
    } else if (ph.kind == PhaseKind::Move) {
      double s = 0.0, v = 0.0, a = 0.0;
      const double vc = ph.cruise, tr = ph.ramp;
      if (tau < tr) {
        const double x = tau / tr;
        s = vc * tr * smoothIntegral(x);
        v = vc * smooth(x);
        a = vc / tr * smoothRate(x);
      } else if (tau <= ph.length - tr) {
        s = 0.5 * vc * tr + vc * (tau - tr);
        v = vc;
      } else {
        const double x = (ph.length - tau) / tr;
        s = ph.distance - vc * tr * smoothIntegral(x);
        v = vc * smooth(x);
        a = -vc / tr * smoothRate(x);
      }
      out.p = ph.p0 + ph.dir * s;
      out.v = ph.dir * v;
      out.a = ph.dir * a;
    }
  }
  out.q = attitude::fromEuler(0.0, pitch + gimbalPitch(t), yaw);
  return out;
}

std::vector<TruthSample> sampleTruth(const std::function<KinematicPose(double)>& pose, double duration,
                                     double rate) {
  if (!(rate > 0.0)) throw ConfigError("sample rate must be positive");
  const double dt = 1.0 / rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate)) + 1;
  std::vector<TruthSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const KinematicPose k = pose(static_cast<double>(i) / rate);
    out[i].timestamp = static_cast<double>(i) / rate;
    out[i].v = k.v;
    out[i].q = k.q;
    if (i == 0) out[i].p = k.p;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    TruthSample& s = out[i];
    const TruthSample& nx = out[i + 1];
    s.accel = (nx.v - s.v) / dt;
    out[i + 1].p = s.p + 0.5 * (s.v + nx.v) * dt;
    Quat e = s.q.conjugate() * nx.q;
    if (e.w() < 0.0) e.coeffs() = -e.coeffs();
    s.omega = 2.0 * e.vec() / (e.w() * dt);
  }
  if (n > 1) {
    out[n - 1].accel = out[n - 2].accel;
    out[n - 1].omega = out[n - 2].omega;
  }
  return out;
}

std::vector<TruthSample> Trajectory::sample(double rate) const {
  auto out = sampleTruth([this](double t) { return at(t); }, duration_, rate);
  for (const auto& s : out)
    if (s.omega.norm() > spec_.max_turn_rate * (1.0 + 1e-3))
      throw ConfigError("trajectory exceeds max_turn_rate at t = " + std::to_string(s.timestamp));
  return out;
}

ImuNoiseSpec ImuNoiseSpec::hguideI300() {
  ImuNoiseSpec s;
  s.velocity_random_walk = 0.03 / 60.0;
  s.angle_random_walk = 0.25 * kDeg / 60.0;
  s.accel_bias_instability = 0.03 * kMilliG;
  s.gyro_bias_instability = 5.0 * kDeg / 3600.0;
  return s;
}

ImuNoiseSpec ImuNoiseSpec::scaled(double factor) const {
  ImuNoiseSpec s = *this;
  s.velocity_random_walk *= factor;
  s.angle_random_walk *= factor;
  s.accel_bias_instability *= factor;
  s.gyro_bias_instability *= factor;
  return s;
}

ImuNoiseDensity ImuNoiseSpec::density() const {
  ImuNoiseDensity d;
  const double k = std::sqrt(2.0 / bias_correlation_time);
  d.accel_noise = std::max(velocity_random_walk, 1e-6);
  d.gyro_noise = std::max(angle_random_walk, 1e-7);
  d.accel_bias_walk = std::max(accel_bias_instability * k, 1e-7);
  d.gyro_bias_walk = std::max(gyro_bias_instability * k, 1e-8);
  return d;
}

void SampleRates::validate() const {
  auto divides = [](double a, double b) {
    const double r = a / b;
    return std::abs(r - std::round(r)) < 1e-9;
  };
  if (imu < 100.0) throw ConfigError("IMU rate must be at least 100 Hz");
  if (!(raw_rss > 0.0) || !(epoch > 0.0)) throw ConfigError("rates must be positive");
  if (!divides(imu, epoch) || !divides(raw_rss, epoch))
    throw ConfigError("IMU and raw RSS rates must be integer multiples of the epoch rate");
  if (!(epoch_window > 0.0) || epoch_window > 1.0 / epoch)
    throw ConfigError("epoch_window must lie in (0, 1/epoch]");
}

void Scenario::validate() const {
  if (leds.empty()) throw ConfigError("scenario has no LEDs");
  for (const auto& led : leds) led.validate();
  for (std::size_t i = 0; i < leds.size(); ++i)
    for (std::size_t k = i + 1; k < leds.size(); ++k)
      if (leds[i].id == leds[k].id) throw ConfigError("duplicate LED id " + std::to_string(leds[i].id));
  receiver.validate();
  trajectory.validate();
  rates.validate();
  if ((room.max.array() <= room.min.array()).any()) throw ConfigError("room bounds are empty");
  if (rss.sigma < 0.0 || rss.raw_sigma < 0.0) throw ConfigError("RSS noise must be non-negative");
  if (!(imu.bias_correlation_time > 0.0)) throw ConfigError("bias correlation time must be positive");
  for (const auto& b : blockages) {
    if (!findLed(leds, b.led_id)) throw ConfigError("blockage references unknown LED " + std::to_string(b.led_id));
    if (!(b.end > b.start)) throw ConfigError("blockage interval must have end > start");
  }
}

ImuSynthesis synthesizeImu(std::span<const TruthSample> truth, const ImuNoiseSpec& noise,
                           const Dcm& R_b_to_v, const Vec3& gravity, std::uint64_t seed) {
  ImuSynthesis out;
  if (truth.empty()) return out;
  auto white = streamEngine(seed, kImuWhite);
  auto walk = streamEngine(seed, kImuBias);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto draw3 = [&](std::mt19937_64& e) { return Vec3(n01(e), n01(e), n01(e)); };

  const double dt = truth.size() > 1 ? truth[1].timestamp - truth[0].timestamp : 1.0;
  const double phi = std::exp(-dt / noise.bias_correlation_time);
  const double drive = std::sqrt(1.0 - phi * phi);
  const Mat3 R_v_to_b = R_b_to_v.transpose();
  Vec3 gm_a = Vec3::Zero(), gm_g = Vec3::Zero();

  out.samples.reserve(truth.size());
  out.bias.reserve(truth.size());
  for (const auto& s : truth) {
    const ImuBias b{noise.initial_accel_bias + gm_a, noise.initial_gyro_bias + gm_g};
    const Vec3 f_v = s.q.toRotationMatrix().transpose() * (s.accel - gravity);
    ImuSample m;
    m.timestamp = s.timestamp;
    m.accel = R_v_to_b * f_v + b.accel + draw3(white) * (noise.velocity_random_walk / std::sqrt(dt));
    m.gyro = R_v_to_b * s.omega + b.gyro + draw3(white) * (noise.angle_random_walk / std::sqrt(dt));
    out.samples.push_back(m);
    out.bias.push_back(b);
    gm_a = phi * gm_a + draw3(walk) * (noise.accel_bias_instability * drive);
    gm_g = phi * gm_g + draw3(walk) * (noise.gyro_bias_instability * drive);
  }
  return out;
}

double blockedFraction(std::span<const BlockageInterval> schedule, int led_id, double t, double window) {
  const double lo = t - 0.5 * window, hi = t + 0.5 * window;
  std::vector<std::pair<double, double>> parts;
  for (const auto& b : schedule) {
    if (b.led_id != led_id) continue;
    const double a = std::max(lo, b.start), c = std::min(hi, b.end);
    if (c > a) parts.emplace_back(a, c);
  }
  std::sort(parts.begin(), parts.end());
  double covered = 0.0, reach = lo;
  for (const auto& [a, c] : parts) {
    const double from = std::max(a, reach);
    if (c > from) covered += c - from;
    reach = std::max(reach, c);
  }
  return covered / window;
}

bool blockedAt(std::span<const BlockageInterval> schedule, int led_id, double t) {
  return std::any_of(schedule.begin(), schedule.end(),
                     [&](const BlockageInterval& b) { return b.led_id == led_id && t > b.start && t <= b.end; });
}

RssSynthesis synthesizeRss(const Trajectory& traj, std::span<const TruthSample> truth,
                           const Scenario& sc, std::uint64_t seed) {
  RssSynthesis out;
  auto raw_engine = streamEngine(seed, kRssRaw);
  auto epoch_engine = streamEngine(seed, kRssEpoch);
  std::normal_distribution<double> n01(0.0, 1.0);
  const ReceiverConfig& rx = sc.receiver;
  const Vec3 lever_v = rx.leverArmV();
  const double duration = traj.duration();

  const auto n_raw = static_cast<std::size_t>(std::floor(duration * sc.rates.raw_rss + 1e-9)) + 1;
  out.raw.reserve(n_raw * sc.leds.size());
  for (std::size_t j = 0; j < n_raw; ++j) {
    const double t = static_cast<double>(j) / sc.rates.raw_rss;
    const KinematicPose k = traj.at(t);
    const Vec3 pd = k.p + k.q.toRotationMatrix() * lever_v;
    for (const auto& led : sc.leds) {
      const double noise = n01(raw_engine) * sc.rss.raw_sigma;
      const auto clean = channel::predictRss(pd, k.q, led, rx);
      if (!clean) continue;
      const double level = blockedAt(sc.blockages, led.id, t) ? 0.0 : *clean;
      out.raw.push_back({t, led.id, std::max(0.0, level + noise)});
    }
  }

  const double w = sc.rates.epoch_window;
  const double imu_per_epoch = sc.rates.imu / sc.rates.epoch;
  for (int k = 1;; ++k) {
    const double t = k / sc.rates.epoch;
    if (t + 0.5 * w > duration + 1e-9) break;
    const auto idx = static_cast<std::size_t>(std::llround(k * imu_per_epoch));
    if (idx >= truth.size()) break;
    const TruthSample& s = truth[idx];
    const Vec3 pd = s.p + s.q.toRotationMatrix() * lever_v;
    for (const auto& led : sc.leds) {
      const double noise = n01(epoch_engine) * sc.rss.sigma;
      RssSample e;
      e.timestamp = t;
      e.led_id = led.id;
      e.variance = sc.rss.sigma * sc.rss.sigma;
      const auto clean = channel::predictRss(pd, s.q, led, rx);
      const double fraction = blockedFraction(sc.blockages, led.id, t, w);
      if (!clean) {
        e.flag = RssFlag::OutOfFov;
        e.value = std::max(0.0, noise);
      } else {
        e.flag = fraction > 0.0 ? RssFlag::Blocked : RssFlag::Los;
        e.value = std::max(0.0, *clean * (1.0 - fraction) + noise);
      }
      out.epochs.push_back(e);
    }
  }
  return out;
}

NavState toNavState(const TruthSample& s, const ImuBias& bias_b, const Dcm& R_b_to_v) {
  NavState x;
  x.timestamp = s.timestamp;
  x.p = s.p;
  x.v = s.v;
  x.q = s.q;
  x.ba = R_b_to_v * bias_b.accel;
  x.bg = R_b_to_v * bias_b.gyro;
  return x;
}

// JSON uses datasheet units: degrees, m/s/√hr, °/√hr, mg and °/hr.

void to_json(nlohmann::json& j, const Scenario& s) {
  using json_util::toJson;
  nlohmann::json wps = nlohmann::json::array();
  for (const auto& w : s.trajectory.waypoints)
    wps.push_back({{"position", toJson(w.position)}, {"speed", w.speed}, {"dwell_s", w.dwell}});
  nlohmann::json gimbal = nlohmann::json::array();
  for (const auto& g : s.trajectory.gimbal) gimbal.push_back({{"time_s", g.time}, {"pitch_deg", g.pitch / kDeg}});
  nlohmann::json traj{{"waypoints", wps},
                      {"gimbal", gimbal},
                      {"initial_static_s", s.trajectory.initial_static},
                      {"end_hold_s", s.trajectory.end_hold},
                      {"ramp_time_s", s.trajectory.ramp_time},
                      {"turn_rate_deg_s", s.trajectory.turn_rate / kDeg},
                      {"max_speed", s.trajectory.max_speed},
                      {"max_turn_rate_deg_s", s.trajectory.max_turn_rate / kDeg}};
  if (!std::isnan(s.trajectory.initial_heading)) traj["initial_heading_deg"] = s.trajectory.initial_heading / kDeg;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : s.blockages) blocks.push_back({{"led", b.led_id}, {"start_s", b.start}, {"end_s", b.end}});
  j = nlohmann::json{
      {"name", s.name},
      {"seed", s.seed},
      {"frame", "u-frame z-up; v-frame x forward, y left, z up"},
      {"room", {{"min", toJson(s.room.min)}, {"max", toJson(s.room.max)}}},
      {"leds", s.leds},
      {"receiver", s.receiver},
      {"trajectory", traj},
      {"imu",
       {{"velocity_random_walk_m_s_sqrt_hr", s.imu.velocity_random_walk * 60.0},
        {"angle_random_walk_deg_sqrt_hr", s.imu.angle_random_walk * 60.0 / kDeg},
        {"accel_bias_instability_mg", s.imu.accel_bias_instability / kMilliG},
        {"gyro_bias_instability_deg_hr", s.imu.gyro_bias_instability * 3600.0 / kDeg},
        {"bias_correlation_time_s", s.imu.bias_correlation_time},
        {"initial_accel_bias", toJson(s.imu.initial_accel_bias)},
        {"initial_gyro_bias", toJson(s.imu.initial_gyro_bias)}}},
      {"rss", {{"sigma", s.rss.sigma}, {"raw_sigma", s.rss.raw_sigma}}},
      {"blockages", blocks},
      {"rates",
       {{"imu_hz", s.rates.imu},
        {"raw_rss_hz", s.rates.raw_rss},
        {"epoch_hz", s.rates.epoch},
        {"epoch_window_s", s.rates.epoch_window}}},
      {"gravity", toJson(s.gravity)}};
}

void from_json(const nlohmann::json& j, Scenario& s) {
  using json_util::valueOr;
  try {
    s = Scenario{};
    s.name = valueOr<std::string>(j, "name", "scenario");
    s.seed = valueOr<std::uint64_t>(j, "seed", 1);
    const auto& room = j.at("room");
    s.room.min = json_util::vec3(room.at("min"), "room.min");
    s.room.max = json_util::vec3(room.at("max"), "room.max");
    s.leds = j.at("leds").get<std::vector<LedBeacon>>();
    if (j.contains("receiver")) s.receiver = j.at("receiver").get<ReceiverConfig>();

    const auto& t = j.at("trajectory");
    for (const auto& w : t.at("waypoints")) {
      Waypoint wp;
      wp.position = json_util::vec3(w.at("position"), "waypoint position");
      wp.speed = valueOr(w, "speed", wp.speed);
      wp.dwell = valueOr(w, "dwell_s", 0.0);
      s.trajectory.waypoints.push_back(wp);
    }
    if (t.contains("gimbal"))
      for (const auto& g : t.at("gimbal"))
        s.trajectory.gimbal.push_back({g.at("time_s").get<double>(), g.at("pitch_deg").get<double>() * kDeg});
    if (t.contains("initial_heading_deg")) s.trajectory.initial_heading = t.at("initial_heading_deg").get<double>() * kDeg;
    s.trajectory.initial_static = valueOr(t, "initial_static_s", 0.0);
    s.trajectory.end_hold = valueOr(t, "end_hold_s", 0.0);
    s.trajectory.ramp_time = valueOr(t, "ramp_time_s", s.trajectory.ramp_time);
    s.trajectory.turn_rate = valueOr(t, "turn_rate_deg_s", s.trajectory.turn_rate / kDeg) * kDeg;
    s.trajectory.max_speed = valueOr(t, "max_speed", s.trajectory.max_speed);
    s.trajectory.max_turn_rate = valueOr(t, "max_turn_rate_deg_s", s.trajectory.max_turn_rate / kDeg) * kDeg;

    if (j.contains("imu")) {
      const auto& m = j.at("imu");
      s.imu.velocity_random_walk = valueOr(m, "velocity_random_walk_m_s_sqrt_hr", 0.0) / 60.0;
      s.imu.angle_random_walk = valueOr(m, "angle_random_walk_deg_sqrt_hr", 0.0) * kDeg / 60.0;
      s.imu.accel_bias_instability = valueOr(m, "accel_bias_instability_mg", 0.0) * kMilliG;
      s.imu.gyro_bias_instability = valueOr(m, "gyro_bias_instability_deg_hr", 0.0) * kDeg / 3600.0;
      s.imu.bias_correlation_time = valueOr(m, "bias_correlation_time_s", s.imu.bias_correlation_time);
      if (m.contains("initial_accel_bias"))
        s.imu.initial_accel_bias = json_util::vec3(m.at("initial_accel_bias"), "initial_accel_bias");
      if (m.contains("initial_gyro_bias"))
        s.imu.initial_gyro_bias = json_util::vec3(m.at("initial_gyro_bias"), "initial_gyro_bias");
    }
    if (j.contains("rss")) {
      s.rss.sigma = valueOr(j.at("rss"), "sigma", s.rss.sigma);
      s.rss.raw_sigma = valueOr(j.at("rss"), "raw_sigma", s.rss.raw_sigma);
    }
    if (j.contains("blockages"))
      for (const auto& b : j.at("blockages"))
        s.blockages.push_back({b.at("led").get<int>(), b.at("start_s").get<double>(), b.at("end_s").get<double>()});
    if (j.contains("rates")) {
      const auto& r = j.at("rates");
      s.rates.imu = valueOr(r, "imu_hz", s.rates.imu);
      s.rates.raw_rss = valueOr(r, "raw_rss_hz", s.rates.raw_rss);
      s.rates.epoch = valueOr(r, "epoch_hz", s.rates.epoch);
      s.rates.epoch_window = valueOr(r, "epoch_window_s", s.rates.epoch_window);
    }
    if (j.contains("gravity")) s.gravity = json_util::vec3(j.at("gravity"), "gravity");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  s.validate();
}

Scenario loadScenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario " + path.string() + ": " + e.what());
  }
  return j.get<Scenario>();
}

}  // namespace vlpins
