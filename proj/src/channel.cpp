#include "vlpins/channel.hpp"

#include <cmath>
#include <fstream>

#include "vlpins/errors.hpp"
#include "vlpins/json_util.hpp"

namespace vlpins {

void LedBeacon::validate() const {
  if (std::abs(normal.norm() - 1.0) > 1e-9) throw ConfigError("LED normal must be a unit vector");
  if (!(lambertian_order >= 1.0)) throw ConfigError("LED Lambertian order must be >= 1");
  if (!(transmit_power > 0.0)) throw ConfigError("LED transmit power must be positive");
}

void ReceiverConfig::validate() const {
  if (!(effective_area > 0.0)) throw ConfigError("receiver effective area must be positive");
  if (!(fov_half_angle > 0.0 && fov_half_angle <= std::numbers::pi / 2.0 + 1e-12))
    throw ConfigError("receiver FOV half angle must lie in (0, pi/2]");
  if (!(filter_gain > 0.0 && concentrator_gain > 0.0))
    throw ConfigError("receiver filter and concentrator gains must be positive");
  if (!(responsivity > 0.0)) throw ConfigError("receiver responsivity must be positive");
  if ((R_b_to_v * R_b_to_v.transpose() - Mat3::Identity()).norm() > 1e-9 ||
      std::abs(R_b_to_v.determinant() - 1.0) > 1e-9)
    throw ConfigError("receiver mounting rotation is not proper orthogonal");
}

std::string toString(RssFlag flag) {
  switch (flag) {
    case RssFlag::Los: return "LOS";
    case RssFlag::Blocked: return "BLOCKED";
    case RssFlag::OutOfFov: return "OUT_OF_FOV";
  }
  return "LOS";
}

RssFlag rssFlagFromString(const std::string& s) {
  if (s == "LOS") return RssFlag::Los;
  if (s == "BLOCKED") return RssFlag::Blocked;
  if (s == "OUT_OF_FOV") return RssFlag::OutOfFov;
  throw ConfigError("unknown RSS flag '" + s + "'");
}

namespace channel {

Vec3 receiverNormal(const Quat& q) {
  const double q0 = q.w(), q1 = q.x(), q2 = q.y(), q3 = q.z();
  return {2.0 * (q1 * q3 + q0 * q2), 2.0 * (q2 * q3 - q0 * q1),
          q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3};
}

LosGeometry losGeometry(const Vec3& pd_pos, const Quat& q, const LedBeacon& led) {
  LosGeometry g;
  g.d_vec = led.position - pd_pos;
  g.distance = g.d_vec.norm();
  if (!(g.distance > 1e-12)) throw DegenerateGeometry("PD coincides with LED " + std::to_string(led.id));
  g.receiver_normal = receiverNormal(q);
  g.cos_psi = g.receiver_normal.dot(g.d_vec) / g.distance;
  g.cos_theta = led.normal.dot(g.d_vec) / g.distance;
  return g;
}

double channelGain(const LedBeacon& led, const ReceiverConfig& rx) {
  return (led.lambertian_order + 1.0) * rx.effective_area * led.transmit_power * rx.filter_gain *
         rx.concentrator_gain * rx.responsivity / (2.0 * std::numbers::pi);
}

double rssUnchecked(const LosGeometry& g, const LedBeacon& led, const ReceiverConfig& rx) {
  const double m = led.lambertian_order;
  const double nd = g.receiver_normal.dot(g.d_vec);
  const double nld = led.normal.dot(g.d_vec);
  return channelGain(led, rx) * nd * std::pow(nld, m) / std::pow(g.distance, 3.0 + m);
}

std::optional<double> predictRss(const Vec3& pd_pos, const Quat& q, const LedBeacon& led,
                                 const ReceiverConfig& rx) {
  const LosGeometry g = losGeometry(pd_pos, q, led);
  if (g.cos_psi < std::cos(rx.fov_half_angle) - 1e-12 || g.cos_theta < 0.0) return std::nullopt;
  if (g.cos_psi <= 0.0) return 0.0;
  return rssUnchecked(g, led, rx);
}

Vec3 positionBracket(const LosGeometry& g, const LedBeacon& led) {
  const double m = led.lambertian_order;
  const Vec3& n = g.receiver_normal;
  return -n / n.dot(g.d_vec) - m * led.normal / led.normal.dot(g.d_vec) +
         (3.0 + m) * g.d_vec / (g.distance * g.distance);
}

namespace {
void requireRegular(const LosGeometry& g, int id) {
  if (g.cos_psi <= kMinCosine || g.cos_theta <= kMinCosine)
    throw NearSingular("grazing geometry for LED " + std::to_string(id));
}
}  // namespace

RssJacobian rssJacobian(const Vec3& pd_pos, const Quat& q, const LedBeacon& led,
                        const ReceiverConfig& rx) {
  const LosGeometry g = losGeometry(pd_pos, q, led);
  requireRegular(g, led.id);
  RssJacobian J;
  J.rss = rssUnchecked(g, led, rx);
  J.d_position = J.rss * positionBracket(g, led);
  J.d_attitude_u = J.rss * g.d_vec.cross(g.receiver_normal) / g.d_vec.dot(g.receiver_normal);
  return J;
}

RssJacobian2d rssJacobian2d(const Vec3& pd_pos, const Quat& q, const LedBeacon& led,
                            const ReceiverConfig& rx) {
  const LosGeometry g = losGeometry(pd_pos, q, led);
  requireRegular(g, led.id);
  RssJacobian2d J;
  J.rss = rssUnchecked(g, led, rx);
  J.d_planar = J.rss * positionBracket(g, led).head<2>();
  J.d_attitude_u = J.rss * g.d_vec.cross(g.receiver_normal) / g.d_vec.dot(g.receiver_normal);
  return J;
}

double headingInformation(const Vec3& pd_pos, const Quat& q, std::span<const LedBeacon> leds,
                          const ReceiverConfig& rx) {
  const Vec3 n = receiverNormal(q);
  double info = 0.0;
  for (const auto& led : leds) {
    const auto J = rssJacobian(pd_pos, q, led, rx);
    const double h = J.d_attitude_u.dot(n);
    info += h * h;
  }
  return info;
}

}  // namespace channel

void to_json(nlohmann::json& j, const LedBeacon& led) {
  j = nlohmann::json{{"id", led.id},
                     {"position", json_util::toJson(led.position)},
                     {"normal", json_util::toJson(led.normal)},
                     {"lambertian_order", led.lambertian_order},
                     {"transmit_power", led.transmit_power},
                     {"modulation_freq", led.modulation_freq}};
}

void from_json(const nlohmann::json& j, LedBeacon& led) {
  led.id = j.at("id").get<int>();
  led.position = json_util::vec3(j.at("position"), "LED position");
  led.normal = j.contains("normal") ? json_util::vec3(j.at("normal"), "LED normal") : Vec3::UnitZ();
  led.lambertian_order = json_util::valueOr(j, "lambertian_order", 1.0);
  led.transmit_power = j.at("transmit_power").get<double>();
  led.modulation_freq = json_util::valueOr(j, "modulation_freq", 0.0);
  led.validate();
}

void to_json(nlohmann::json& j, const ReceiverConfig& rx) {
  j = nlohmann::json{{"effective_area", rx.effective_area},
                     {"filter_gain", rx.filter_gain},
                     {"concentrator_gain", rx.concentrator_gain},
                     {"fov_half_angle", rx.fov_half_angle},
                     {"responsivity", rx.responsivity},
                     {"lever_arm", json_util::toJson(rx.lever_arm)},
                     {"R_b_to_v", json_util::toJson(rx.R_b_to_v)},
                     {"pd_height", rx.pd_height}};
}

void from_json(const nlohmann::json& j, ReceiverConfig& rx) {
  rx = ReceiverConfig{};
  rx.effective_area = j.at("effective_area").get<double>();
  rx.filter_gain = json_util::valueOr(j, "filter_gain", 1.0);
  rx.concentrator_gain = json_util::valueOr(j, "concentrator_gain", 1.0);
  rx.fov_half_angle = json_util::valueOr(j, "fov_half_angle", std::numbers::pi / 2.0);
  rx.responsivity = json_util::valueOr(j, "responsivity", 1.0);
  if (j.contains("lever_arm")) rx.lever_arm = json_util::vec3(j.at("lever_arm"), "lever_arm");
  if (j.contains("R_b_to_v")) rx.R_b_to_v = json_util::mat3(j.at("R_b_to_v"), "R_b_to_v");
  rx.pd_height = json_util::valueOr(j, "pd_height", 0.0);
  rx.validate();
}

std::vector<LedBeacon> loadLedMap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open LED map " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("LED map " + path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw ConfigError("LED map must be a JSON array");
  try {
    return j.get<std::vector<LedBeacon>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("LED map " + path.string() + ": " + e.what());
  }
}

void saveLedMap(const std::filesystem::path& path, std::span<const LedBeacon> leds) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write LED map " + path.string());
  nlohmann::json j = nlohmann::json::array();
  for (const auto& led : leds) j.push_back(led);
  out << j.dump(2) << '\n';
}

const LedBeacon* findLed(std::span<const LedBeacon> leds, int id) {
  for (const auto& led : leds)
    if (led.id == id) return &led;
  return nullptr;
}

}  // namespace vlpins
