#include "vlpins/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "vlpins/errors.hpp"
#include "vlpins/json_util.hpp"

namespace vlpins {

using nlohmann::json;

void EstimatorConfig::validate() const {
  if (window < 2 || window_unknown_leds < 2) throw ConfigError("window must hold at least 2 epochs");
  if (!(rss_sigma > 0.0) || !(blocked_variance > 0.0))
    throw ConfigError("RSS variances must be positive");
  if (!(constraints.nhc_sigma > 0.0) || !(constraints.height_sigma > 0.0))
    throw ConfigError("constraint sigmas must be positive");
  if (!(imu_noise.accel_noise > 0.0 && imu_noise.gyro_noise > 0.0 && imu_noise.accel_bias_walk > 0.0 &&
        imu_noise.gyro_bias_walk > 0.0))
    throw ConfigError("IMU noise densities must be positive");
  if (lm.max_iterations < 1 || !(lm.lambda_init >= 0.0) || !(lm.lambda_max > 0.0))
    throw ConfigError("invalid LM options");
  if (!(unknown_led_prior_sigma > 0.0)) throw ConfigError("unknown LED prior sigma must be positive");
  if (!(unknown_led_max_dop > 0.0)) throw ConfigError("unknown LED DOP limit must be positive");
}

void to_json(json& j, const EstimatorConfig& c) {
  j = json{{"window", c.window},
           {"window_unknown_leds", c.window_unknown_leds},
           {"nhc", {{"lateral", c.constraints.nhc_lateral},
                    {"vertical", c.constraints.nhc_vertical},
                    {"sigma", c.constraints.nhc_sigma}}},
           {"height", {{"enabled", c.constraints.height}, {"sigma", c.constraints.height_sigma}}},
           {"rss_sigma", c.rss_sigma},
           {"blocked_variance", c.blocked_variance},
           {"blocked_policy", c.blocked_policy == BlockedPolicy::Exclude ? "exclude" : "down_weight"},
           {"imu_noise", {{"accel_noise", c.imu_noise.accel_noise},
                          {"gyro_noise", c.imu_noise.gyro_noise},
                          {"accel_bias_walk", c.imu_noise.accel_bias_walk},
                          {"gyro_bias_walk", c.imu_noise.gyro_bias_walk}}},
           {"lm", {{"max_iterations", c.lm.max_iterations},
                   {"relative_cost_tolerance", c.lm.relative_cost_tolerance},
                   {"step_tolerance", c.lm.step_tolerance},
                   {"lambda_init", c.lm.lambda_init},
                   {"lambda_max", c.lm.lambda_max}}},
           {"initial_sigmas", {{"position", c.initial.position},
                               {"velocity", c.initial.velocity},
                               {"tilt", c.initial.tilt},
                               {"heading", c.initial.heading},
                               {"accel_bias", c.initial.accel_bias},
                               {"gyro_bias", c.initial.gyro_bias}}},
           {"gravity", json_util::toJson(c.gravity)},
           {"unknown_leds", c.unknown_leds},
           {"unknown_led_prior_sigma", c.unknown_led_prior_sigma},
           {"unknown_led_cov_threshold", c.unknown_led_cov_threshold},
           {"unknown_led_max_shift", c.unknown_led_max_shift},
           {"unknown_led_max_dop", c.unknown_led_max_dop}};
  if (c.constraints.height_target_set) j["height"]["target"] = c.constraints.height_target;
}

void from_json(const json& j, EstimatorConfig& c) {
  using json_util::valueOr;
  c = EstimatorConfig{};
  c.window = valueOr(j, "window", c.window);
  c.window_unknown_leds = valueOr(j, "window_unknown_leds", c.window_unknown_leds);
  if (j.contains("nhc")) {
    const auto& n = j.at("nhc");
    c.constraints.nhc_lateral = valueOr(n, "lateral", c.constraints.nhc_lateral);
    c.constraints.nhc_vertical = valueOr(n, "vertical", c.constraints.nhc_vertical);
    c.constraints.nhc_sigma = valueOr(n, "sigma", c.constraints.nhc_sigma);
  }
  if (j.contains("height")) {
    const auto& h = j.at("height");
    c.constraints.height = valueOr(h, "enabled", c.constraints.height);
    c.constraints.height_sigma = valueOr(h, "sigma", c.constraints.height_sigma);
    if (h.contains("target")) {
      c.constraints.height_target = h.at("target").get<double>();
      c.constraints.height_target_set = true;
    }
  }
  c.rss_sigma = valueOr(j, "rss_sigma", c.rss_sigma);
  c.blocked_variance = valueOr(j, "blocked_variance", c.blocked_variance);
  const std::string policy = valueOr<std::string>(j, "blocked_policy", "down_weight");
  if (policy == "exclude")
    c.blocked_policy = BlockedPolicy::Exclude;
  else if (policy == "down_weight")
    c.blocked_policy = BlockedPolicy::DownWeight;
  else
    throw ConfigError("unknown blocked_policy '" + policy + "'");
  if (j.contains("imu_noise")) {
    const auto& n = j.at("imu_noise");
    c.imu_noise.accel_noise = valueOr(n, "accel_noise", c.imu_noise.accel_noise);
    c.imu_noise.gyro_noise = valueOr(n, "gyro_noise", c.imu_noise.gyro_noise);
    c.imu_noise.accel_bias_walk = valueOr(n, "accel_bias_walk", c.imu_noise.accel_bias_walk);
    c.imu_noise.gyro_bias_walk = valueOr(n, "gyro_bias_walk", c.imu_noise.gyro_bias_walk);
  }
  if (j.contains("lm")) {
    const auto& l = j.at("lm");
    c.lm.max_iterations = valueOr(l, "max_iterations", c.lm.max_iterations);
    c.lm.relative_cost_tolerance = valueOr(l, "relative_cost_tolerance", c.lm.relative_cost_tolerance);
    c.lm.step_tolerance = valueOr(l, "step_tolerance", c.lm.step_tolerance);
    c.lm.lambda_init = valueOr(l, "lambda_init", c.lm.lambda_init);
    c.lm.lambda_max = valueOr(l, "lambda_max", c.lm.lambda_max);
  }
  if (j.contains("initial_sigmas")) {
    const auto& s = j.at("initial_sigmas");
    c.initial.position = valueOr(s, "position", c.initial.position);
    c.initial.velocity = valueOr(s, "velocity", c.initial.velocity);
    c.initial.tilt = valueOr(s, "tilt", c.initial.tilt);
    c.initial.heading = valueOr(s, "heading", c.initial.heading);
    c.initial.accel_bias = valueOr(s, "accel_bias", c.initial.accel_bias);
    c.initial.gyro_bias = valueOr(s, "gyro_bias", c.initial.gyro_bias);
  }
  if (j.contains("gravity")) c.gravity = json_util::vec3(j.at("gravity"), "gravity");
  c.unknown_leds = valueOr(j, "unknown_leds", c.unknown_leds);
  c.unknown_led_prior_sigma = valueOr(j, "unknown_led_prior_sigma", c.unknown_led_prior_sigma);
  c.unknown_led_cov_threshold = valueOr(j, "unknown_led_cov_threshold", c.unknown_led_cov_threshold);
  c.unknown_led_max_shift = valueOr(j, "unknown_led_max_shift", c.unknown_led_max_shift);
  c.unknown_led_max_dop = valueOr(j, "unknown_led_max_dop", c.unknown_led_max_dop);
  c.validate();
}

EstimatorConfig loadEstimatorConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open estimator config " + path.string());
  try {
    return json::parse(in).get<EstimatorConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("estimator config " + path.string() + ": " + e.what());
  }
}

double dop(std::span<const Vec2> points, const Vec2& led) {
  if (points.size() < 3) return std::numeric_limits<double>::infinity();
  Eigen::Matrix2d AtA = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Vec2 d = led - p;
    const double n = d.norm();
    if (n < 1e-9) continue;
    const Vec2 u = d / n;
    AtA += u * u.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(AtA);
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo > 1e-10 * std::max(es.eigenvalues().maxCoeff(), 1e-300)))
    return std::numeric_limits<double>::infinity();
  return std::sqrt(es.eigenvalues().cwiseInverse().sum());
}

Quat levelAttitude(std::span<const ImuSample> static_samples, const Dcm& R_b_to_v, double heading) {
  if (static_samples.empty()) throw ConfigError("levelling needs at least one IMU sample");
  Vec3 f = Vec3::Zero();
  for (const auto& s : static_samples) f += R_b_to_v * s.accel;
  f /= static_cast<double>(static_samples.size());
  const double roll = std::atan2(f.y(), f.z());
  const double pitch = std::atan2(-f.x(), std::hypot(f.y(), f.z()));
  return attitude::fromEuler(roll, pitch, heading);
}

std::vector<ImuSample> imuSlice(std::span<const ImuSample> stream, double t0, double t1) {
  std::vector<ImuSample> out;
  auto it = std::upper_bound(stream.begin(), stream.end(), t0,
                             [](double t, const ImuSample& s) { return t < s.timestamp; });
  if (it != stream.begin()) {
    ImuSample first = *(it - 1);
    if (first.timestamp < t0) first.timestamp = t0;
    out.push_back(first);
  }
  for (; it != stream.end() && it->timestamp < t1 - 1e-9; ++it) out.push_back(*it);
  return out;
}

SlidingWindowEstimator::SlidingWindowEstimator(EstimatorConfig cfg, std::vector<LedBeacon> leds,
                                               ReceiverConfig rx)
    : cfg_(std::move(cfg)), leds_(std::move(leds)), rx_(std::move(rx)) {
  cfg_.validate();
  rx_.validate();
  if (cfg_.constraints.height && !cfg_.constraints.height_target_set)
    cfg_.constraints.height_target = rx_.pd_height - rx_.leverArmV().z();
  for (int id : cfg_.unknown_leds) {
    const LedBeacon* led = findLed(leds_, id);
    if (!led) throw ConfigError("unknown LED " + std::to_string(id) + " is not in the LED map");
    const Vec2 guess = led->position.head<2>();
    const int b = graph_.addBlock(nls::ParameterBlock::euclidean(guess));
    graph_.addFactor(std::make_unique<EuclideanPriorFactor>(
        b, guess, Eigen::Vector2d::Constant(cfg_.unknown_led_prior_sigma)));
    led_blocks_[id] = b;
    led_initial_[id] = guess;
    led_diverged_[id] = false;
  }
}

int SlidingWindowEstimator::addState(const NavState& x) {
  const int b = graph_.addBlock(nls::ParameterBlock::fromNav(x));
  window_.push_back({b, x.timestamp});
  return b;
}

NavState SlidingWindowEstimator::stateOf(const Slot& s) const {
  NavState x = graph_.block(s.block).nav();
  x.timestamp = s.timestamp;
  return x;
}

NavState SlidingWindowEstimator::latest() const {
  if (window_.empty()) throw std::logic_error("estimator is not initialized");
  return stateOf(window_.back());
}

std::vector<NavState> SlidingWindowEstimator::windowStates() const {
  std::vector<NavState> out;
  for (const auto& s : window_) out.push_back(stateOf(s));
  return out;
}

std::vector<NavState> SlidingWindowEstimator::smoothed() const {
  std::vector<NavState> out = finalized_;
  for (const auto& s : window_) out.push_back(stateOf(s));
  return out;
}

void SlidingWindowEstimator::addMeasurements(int block, double t, std::span<const RssSample> rss,
                                             std::span<const PositionFix> fixes,
                                             EpochDiagnostics& diag) {
  const auto& c = cfg_.constraints;
  for (const auto& s : rss) {
    const LedBeacon* led = findLed(leds_, s.led_id);
    if (!led) continue;
    const bool los = s.flag == RssFlag::Los;
    if (!los && cfg_.blocked_policy == BlockedPolicy::Exclude) continue;
    const double var = los ? cfg_.rss_sigma * cfg_.rss_sigma : cfg_.blocked_variance;
    std::optional<int> led_block;
    if (auto it = led_blocks_.find(s.led_id); it != led_blocks_.end()) led_block = it->second;
    graph_.addFactor(std::make_unique<VlpFactor>(block, led_block, *led, rx_, s.value, var));
    if (los)
      ++diag.los_count;
    else
      ++diag.down_weighted;
  }
  for (const auto& f : fixes)
    graph_.addFactor(std::make_unique<PositionFixFactor>(block, f.pd_position, f.covariance, rx_.leverArmV()));
  if (c.height) graph_.addFactor(std::make_unique<HeightFactor>(block, c.height_target, c.height_sigma));
  if (c.nhc_lateral || c.nhc_vertical)
    graph_.addFactor(std::make_unique<NhcFactor>(block, c.nhc_lateral, c.nhc_vertical, c.nhc_sigma));
  (void)t;
}

EpochDiagnostics SlidingWindowEstimator::initialize(const NavState& x0, std::span<const RssSample> rss,
                                                    std::span<const PositionFix> fixes) {
  if (initialized()) throw std::logic_error("estimator already initialized");
  const int b = addState(x0);
  const auto& s = cfg_.initial;
  Vector15 sig;
  sig << Vec3::Constant(s.position), Vec3::Constant(s.velocity), s.tilt, s.tilt, s.heading,
      Vec3::Constant(s.accel_bias), Vec3::Constant(s.gyro_bias);
  // The heading sigma applies about the u-frame vertical; for a near-level
  // start this is the v-frame z axis.
  graph_.addFactor(std::make_unique<NavPriorFactor>(b, x0, sig));
  EpochDiagnostics diag;
  diag.timestamp = x0.timestamp;
  addMeasurements(b, x0.timestamp, rss, fixes, diag);
  return solve(diag);
}

NavState SlidingWindowEstimator::predict(double t, std::span<const ImuSample> imu) const {
  const NavState last = latest();
  if (imu.empty() || !(t > last.timestamp)) {
    NavState x = last;
    x.timestamp = t;
    return x;
  }
  const auto pre = preintegrate(imu, t, {last.ba, last.bg}, rx_.R_b_to_v, cfg_.imu_noise);
  NavState x = propagate(pre, last, cfg_.gravity);
  x.timestamp = t;
  return x;
}

EpochDiagnostics SlidingWindowEstimator::addEpoch(double t, std::span<const ImuSample> imu,
                                                  std::span<const RssSample> rss,
                                                  std::span<const PositionFix> fixes) {
  if (!initialized()) throw std::logic_error("estimator is not initialized");
  const NavState last = latest();
  if (!(t > last.timestamp)) throw ConfigError("epochs must have increasing timestamps");
  if (imu.empty()) throw ConfigError("epoch at t=" + std::to_string(t) + " has no IMU samples");
  auto pre = std::make_shared<PreintegratedImu>(
      preintegrate(imu, t, {last.ba, last.bg}, rx_.R_b_to_v, cfg_.imu_noise));
  NavState seed = propagate(*pre, last, cfg_.gravity);
  seed.timestamp = t;
  const int prev = window_.back().block;
  const int b = addState(seed);
  graph_.addFactor(std::make_unique<ImuFactor>(prev, b, pre, cfg_.gravity));
  EpochDiagnostics diag;
  diag.timestamp = t;
  addMeasurements(b, t, rss, fixes, diag);
  if (static_cast<int>(window_.size()) > cfg_.effectiveWindow()) slide();
  return solve(diag);
}

void SlidingWindowEstimator::slide() {
  const Slot oldest = window_.front();
  finalized_.push_back(stateOf(oldest));
  nls::marginalize(graph_, {oldest.block});
  window_.erase(window_.begin());
}

EpochDiagnostics SlidingWindowEstimator::solve(EpochDiagnostics diag) {
  std::vector<int> watch;
  for (const auto& [id, b] : led_blocks_) watch.push_back(b);
  const auto rep = nls::solveLm(graph_, cfg_.lm, watch);
  diag.initial_cost = rep.initial_cost;
  diag.cost = rep.final_cost;
  diag.iterations = static_cast<int>(rep.iterations.size());
  diag.converged = rep.converged;

  if (!led_blocks_.empty()) {
    std::vector<Vec2> pts;
    for (const auto& s : window_) pts.push_back(pdPosition(stateOf(s), rx_).head<2>());
    for (const auto& [id, b] : led_blocks_) {
      const Vec2 est = graph_.block(b).value;
      diag.led_dop[id] = dop(pts, est);
      bool growing = false;
      if (auto it = rep.watched_steps.find(b); it != rep.watched_steps.end() && it->second.size() >= 3) {
        const auto& st = it->second;
        const std::size_t n = st.size();
        growing = st[n - 1] > st[n - 2] && st[n - 2] > st[n - 3] && st[n - 1] > 1e-3;
      }
      // Reflects the latest solve: early growth while the guess is far off is not fatal.
      led_diverged_[id] = growing || (est - led_initial_[id]).norm() > cfg_.unknown_led_max_shift || !est.allFinite();
    }
  }
  return diag;
}

std::vector<UnknownLedEstimate> SlidingWindowEstimator::unknownLeds() const {
  std::vector<UnknownLedEstimate> out;
  if (led_blocks_.empty()) return out;
  std::vector<int> ids;
  for (const auto& [id, b] : led_blocks_) ids.push_back(b);
  const auto cov = graph_.marginalCovariance(ids);
  std::vector<Vec2> pts;
  for (const auto& s : window_) pts.push_back(pdPosition(stateOf(s), rx_).head<2>());
  for (const auto& [id, b] : led_blocks_) {
    UnknownLedEstimate e;
    e.id = id;
    e.initial = led_initial_.at(id);
    e.position = graph_.block(b).value;
    e.covariance = cov.at(b);
    e.diverged = led_diverged_.at(id);
    double worst = std::numeric_limits<double>::infinity();
    if (e.covariance.allFinite()) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(e.covariance);
      worst = es.eigenvalues().maxCoeff();
    }
    e.dop = dop(pts, e.position);
    // Relinearized marginal priors can understate the covariance of a poorly
    // observed LED, so the geometry is checked as well.
    e.flagged = e.diverged || !(worst <= cfg_.unknown_led_cov_threshold) || !(e.dop <= cfg_.unknown_led_max_dop);
    out.push_back(e);
  }
  return out;
}

}  // namespace vlpins
