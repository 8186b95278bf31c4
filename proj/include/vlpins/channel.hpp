#pragma once

#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlpins/attitude.hpp"

namespace vlpins {

/// Ceiling-mounted transmitter. Positions and normals are u-frame, SI units.
struct LedBeacon {
  int id = 0;
  Vec3 position = Vec3::Zero();
  /// Unit vector opposite to the radiating direction (up for ceiling LEDs).
  Vec3 normal = Vec3::UnitZ();
  double lambertian_order = 1.0;
  double transmit_power = 1.0;  // W
  double modulation_freq = 0.0; // Hz, metadata only

  void validate() const;
};

/// Photodiode front end and its mounting on the IMU body.
struct ReceiverConfig {
  double effective_area = 1e-4;  // m^2
  double filter_gain = 1.0;
  double concentrator_gain = 1.0;
  double fov_half_angle = std::numbers::pi / 2.0;
  /// Sensor units per watt. 1 keeps predictions in watts.
  double responsivity = 1.0;
  /// IMU centre to PD centre, b-frame.
  Vec3 lever_arm = Vec3::Zero();
  /// C^v_b, the IMU-to-VLP mounting rotation.
  Dcm R_b_to_v = Dcm::Identity();
  /// PD height above the u-frame origin when the receiver is level (2-D mode).
  double pd_height = 0.0;

  void validate() const;
  /// Lever arm rotated into the v-frame, C^v_b·ℓ^b.
  Vec3 leverArmV() const { return R_b_to_v * lever_arm; }
};

enum class RssFlag { Los, Blocked, OutOfFov };

std::string toString(RssFlag flag);
RssFlag rssFlagFromString(const std::string& s);

/// One LED's epoch-rate received signal strength.
struct RssSample {
  double timestamp = 0.0;
  int led_id = 0;
  double value = 0.0;
  double variance = 1.0;
  RssFlag flag = RssFlag::Los;
};

struct LosGeometry {
  Vec3 d_vec;        // PD → LED, u-frame
  double distance;
  double cos_psi;    // incidence at the receiver
  double cos_theta;  // irradiance at the LED
  Vec3 receiver_normal;
};

namespace channel {

/// Grazing threshold below which the derivative denominators are rejected.
inline constexpr double kMinCosine = 1e-6;

/// Receiver-plane normal n^u = R^u_v·[0,0,1].
Vec3 receiverNormal(const Quat& q);

LosGeometry losGeometry(const Vec3& pd_pos, const Quat& q, const LedBeacon& led);

/// Common amplitude (m+1)·A_R·P_T·T_s·g·responsivity / 2π.
double channelGain(const LedBeacon& led, const ReceiverConfig& rx);

/// Lambertian RSS in the refactored dot-product form. Returns std::nullopt
/// when the LED is outside the receiver field of view or behind the LED
/// plane; a grazing (cos ψ = 0) prediction inside the FOV is exactly zero.
std::optional<double> predictRss(const Vec3& pd_pos, const Quat& q, const LedBeacon& led,
                                 const ReceiverConfig& rx);

/// Evaluates the refactored formula regardless of FOV.
double rssUnchecked(const LosGeometry& g, const LedBeacon& led, const ReceiverConfig& rx);

/// −n/(n·D) − m·n_l/(n_l·D) + (3+m)·D/D². Multiplied by P this is ∂P/∂r.
Vec3 positionBracket(const LosGeometry& g, const LedBeacon& led);

struct RssJacobian {
  double rss;
  Vec3 d_position;    // ∂P/∂r, per metre
  Vec3 d_attitude_u;  // ∂P/∂φ^u, u-frame disturbance R' = (I − [dφ×])R
};

struct RssJacobian2d {
  double rss;
  Vec2 d_planar;
  Vec3 d_attitude_u;
};

/// Throws NearSingular when cos ψ or cos θ ≤ kMinCosine.
RssJacobian rssJacobian(const Vec3& pd_pos, const Quat& q, const LedBeacon& led,
                        const ReceiverConfig& rx);

/// Planar form for ceiling LEDs (n_l = [0,0,1]); height held fixed.
RssJacobian2d rssJacobian2d(const Vec3& pd_pos, const Quat& q, const LedBeacon& led,
                            const ReceiverConfig& rx);

/// Σ_l (∂P_l/∂φ^u · n^u)². Zero up to rounding for every geometry.
double headingInformation(const Vec3& pd_pos, const Quat& q, std::span<const LedBeacon> leds,
                          const ReceiverConfig& rx);

}  // namespace channel

void to_json(nlohmann::json& j, const LedBeacon& led);
void from_json(const nlohmann::json& j, LedBeacon& led);
void to_json(nlohmann::json& j, const ReceiverConfig& rx);
void from_json(const nlohmann::json& j, ReceiverConfig& rx);

/// LED map file: JSON array of LED records (see README for the schema).
std::vector<LedBeacon> loadLedMap(const std::filesystem::path& path);
void saveLedMap(const std::filesystem::path& path, std::span<const LedBeacon> leds);
const LedBeacon* findLed(std::span<const LedBeacon> leds, int id);

}  // namespace vlpins
