#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vlpins/simulator.hpp"

namespace vlpins {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kFormatVersion = 1;

/// Everything one simulated or recorded run provides to the estimators.
struct Dataset {
  /// Scenario with the seed actually used. Only receiver, LEDs, rates,
  /// gravity and the initial heading are needed for estimation.
  Scenario scenario;
  std::vector<ImuSample> imu;
  std::vector<RawRssSample> rss_raw;
  /// Epoch values; flags hold ground-truth labels when simulated.
  std::vector<RssSample> rss_epoch;
  /// Truth at IMU rate (biases in the v-frame). Empty for recorded data.
  std::vector<NavState> truth;

  double initialHeading() const;
};

/// Runs trajectory, IMU and RSS synthesis. Throws ConfigError when the
/// trajectory leaves the room.
Dataset simulate(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt);

/// Writes imu.csv, rss_raw.csv, rss_epoch.csv, truth.csv, blockage_truth.csv,
/// leds.json, scenario.json and manifest.json. Returns file name → hash.
std::map<std::string, std::string> writeDataset(const Dataset& d, const std::filesystem::path& dir);
Dataset readDataset(const std::filesystem::path& dir);

std::vector<ImuSample> readImuCsv(const std::filesystem::path& path);
std::vector<RawRssSample> readRawRssCsv(const std::filesystem::path& path);
std::vector<RssSample> readEpochRssCsv(const std::filesystem::path& path, double default_variance);
std::vector<NavState> readTruthCsv(const std::filesystem::path& path);
std::vector<BlockageInterval> readBlockageTruthCsv(const std::filesystem::path& path);

void writeImuCsv(const std::filesystem::path& path, std::span<const ImuSample> imu);
void writeRawRssCsv(const std::filesystem::path& path, std::span<const RawRssSample> raw);
void writeEpochRssCsv(const std::filesystem::path& path, std::span<const RssSample> epochs);
/// Trajectory layout shared by truth.csv and estimator output.
void writeStatesCsv(const std::filesystem::path& path, std::span<const NavState> states);
void writeDetectionsCsv(const std::filesystem::path& path, std::span<const TaggedRawSample> tagged);

/// Writes a JSON document with 2-space indentation and a trailing newline.
void writeJson(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace vlpins
