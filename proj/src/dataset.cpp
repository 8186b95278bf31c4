#include "vlpins/dataset.hpp"

#include <cmath>
#include <fstream>

#include "vlpins/csv.hpp"
#include "vlpins/errors.hpp"

namespace vlpins {

namespace {

constexpr double kRad2Deg = 180.0 / std::numbers::pi;

const std::vector<std::string> kImuHeader{"timestamp_s", "ax", "ay", "az", "gx", "gy", "gz"};
const std::vector<std::string> kRawHeader{"timestamp_s", "led_id", "value"};
const std::vector<std::string> kEpochHeader{"timestamp_s", "led_id", "value", "variance", "flag"};
const std::vector<std::string> kStateHeader{"timestamp_s", "px", "py", "pz", "vx", "vy", "vz",
                                            "qw", "qx", "qy", "qz", "roll_deg", "pitch_deg", "yaw_deg",
                                            "bax", "bay", "baz", "bgx", "bgy", "bgz"};
const std::vector<std::string> kBlockHeader{"led_id", "start_s", "end_s"};
const std::vector<std::string> kDetectHeader{"timestamp_s", "led_id", "tag", "counter"};

void requireIncreasing(double prev, double t, const std::string& what) {
  if (!(t > prev)) throw ConfigError(what + ": timestamps must be strictly increasing");
}

}  // namespace

double Dataset::initialHeading() const {
  const double h = scenario.trajectory.initial_heading;
  if (!std::isnan(h)) return h;
  if (!truth.empty()) return attitude::toEuler(truth.front().q).z();
  return 0.0;
}

Dataset simulate(const Scenario& scenario, std::optional<std::uint64_t> seed) {
  scenario.validate();
  Dataset d;
  d.scenario = scenario;
  if (seed) d.scenario.seed = *seed;
  const Scenario& sc = d.scenario;

  const Trajectory traj(sc.trajectory);
  const auto truth = traj.sample(sc.rates.imu);
  for (const auto& s : truth)
    if (!sc.room.contains(s.p))
      throw ConfigError("trajectory leaves the room at t = " + std::to_string(s.timestamp));
  if (std::isnan(d.scenario.trajectory.initial_heading))
    d.scenario.trajectory.initial_heading = attitude::toEuler(truth.front().q).z();

  auto imu = synthesizeImu(truth, sc.imu, sc.receiver.R_b_to_v, sc.gravity, sc.seed);
  auto rss = synthesizeRss(traj, truth, sc, sc.seed);
  d.imu = std::move(imu.samples);
  d.rss_raw = std::move(rss.raw);
  d.rss_epoch = std::move(rss.epochs);
  d.truth.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    d.truth.push_back(toNavState(truth[i], imu.bias[i], sc.receiver.R_b_to_v));
  return d;
}

void writeImuCsv(const std::filesystem::path& path, std::span<const ImuSample> imu) {
  csv::Writer w(kImuHeader);
  for (const auto& s : imu) {
    w << s.timestamp;
    for (int i = 0; i < 3; ++i) w << s.accel[i];
    for (int i = 0; i < 3; ++i) w << s.gyro[i];
    w.endRow();
  }
  w.save(path);
}

void writeRawRssCsv(const std::filesystem::path& path, std::span<const RawRssSample> raw) {
  csv::Writer w(kRawHeader);
  for (const auto& s : raw) {
    w << s.timestamp << s.led_id << s.value;
    w.endRow();
  }
  w.save(path);
}

void writeEpochRssCsv(const std::filesystem::path& path, std::span<const RssSample> epochs) {
  csv::Writer w(kEpochHeader);
  for (const auto& s : epochs) {
    w << s.timestamp << s.led_id << s.value << s.variance << toString(s.flag);
    w.endRow();
  }
  w.save(path);
}

void writeStatesCsv(const std::filesystem::path& path, std::span<const NavState> states) {
  csv::Writer w(kStateHeader);
  for (const auto& x : states) {
    const Vec3 e = attitude::toEuler(x.q) * kRad2Deg;
    w << x.timestamp;
    for (int i = 0; i < 3; ++i) w << x.p[i];
    for (int i = 0; i < 3; ++i) w << x.v[i];
    w << x.q.w() << x.q.x() << x.q.y() << x.q.z();
    for (int i = 0; i < 3; ++i) w << e[i];
    for (int i = 0; i < 3; ++i) w << x.ba[i];
    for (int i = 0; i < 3; ++i) w << x.bg[i];
    w.endRow();
  }
  w.save(path);
}

void writeDetectionsCsv(const std::filesystem::path& path, std::span<const TaggedRawSample> tagged) {
  csv::Writer w(kDetectHeader);
  for (const auto& s : tagged) {
    w << s.timestamp << s.led_id << toString(s.tag) << s.counter;
    w.endRow();
  }
  w.save(path);
}

std::vector<ImuSample> readImuCsv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  csv::requireColumns(t, kImuHeader, path.string());
  std::vector<std::size_t> c;
  for (const auto& h : kImuHeader) c.push_back(t.column(h));
  std::vector<ImuSample> out;
  out.reserve(t.rows.size());
  const std::string what = path.filename().string();
  for (const auto& r : t.rows) {
    ImuSample s;
    s.timestamp = csv::toDouble(r[c[0]], what);
    for (int i = 0; i < 3; ++i) {
      s.accel[i] = csv::toDouble(r[c[1 + i]], what);
      s.gyro[i] = csv::toDouble(r[c[4 + i]], what);
    }
    if (!out.empty()) requireIncreasing(out.back().timestamp, s.timestamp, what);
    out.push_back(s);
  }
  return out;
}

std::vector<RawRssSample> readRawRssCsv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  csv::requireColumns(t, kRawHeader, path.string());
  const auto ct = t.column("timestamp_s"), cl = t.column("led_id"), cv = t.column("value");
  const std::string what = path.filename().string();
  std::vector<RawRssSample> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    out.push_back({csv::toDouble(r[ct], what), static_cast<int>(csv::toInt(r[cl], what)), csv::toDouble(r[cv], what)});
    if (out.size() > 1 && out.back().timestamp < out[out.size() - 2].timestamp)
      throw ConfigError(what + ": timestamps must be non-decreasing");
  }
  return out;
}

std::vector<RssSample> readEpochRssCsv(const std::filesystem::path& path, double default_variance) {
  const auto t = csv::read(path);
  csv::requireColumns(t, {"timestamp_s", "led_id", "value"}, path.string());
  const auto ct = t.column("timestamp_s"), cl = t.column("led_id"), cv = t.column("value");
  const bool has_var = std::find(t.header.begin(), t.header.end(), "variance") != t.header.end();
  const bool has_flag = std::find(t.header.begin(), t.header.end(), "flag") != t.header.end();
  const std::string what = path.filename().string();
  std::vector<RssSample> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    RssSample s;
    s.timestamp = csv::toDouble(r[ct], what);
    s.led_id = static_cast<int>(csv::toInt(r[cl], what));
    s.value = csv::toDouble(r[cv], what);
    s.variance = has_var ? csv::toDouble(r[t.column("variance")], what) : default_variance;
    if (!(s.variance > 0.0)) throw ConfigError(what + ": variance must be positive");
    s.flag = has_flag ? rssFlagFromString(r[t.column("flag")]) : RssFlag::Los;
    out.push_back(s);
  }
  return out;
}

std::vector<NavState> readTruthCsv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  const std::vector<std::string> need{"timestamp_s", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz"};
  csv::requireColumns(t, need, path.string());
  std::vector<std::size_t> c;
  for (const auto& h : need) c.push_back(t.column(h));
  const bool has_bias = std::find(t.header.begin(), t.header.end(), "bax") != t.header.end();
  const std::string what = path.filename().string();
  std::vector<NavState> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    NavState x;
    auto f = [&](std::size_t k) { return csv::toDouble(r[c[k]], what); };
    x.timestamp = f(0);
    x.p = Vec3(f(1), f(2), f(3));
    x.v = Vec3(f(4), f(5), f(6));
    x.q = Quat(f(7), f(8), f(9), f(10)).normalized();
    if (has_bias) {
      for (int i = 0; i < 3; ++i) {
        x.ba[i] = csv::toDouble(r[t.column(kStateHeader[14 + i])], what);
        x.bg[i] = csv::toDouble(r[t.column(kStateHeader[17 + i])], what);
      }
    }
    if (!out.empty()) requireIncreasing(out.back().timestamp, x.timestamp, what);
    out.push_back(x);
  }
  return out;
}

std::vector<BlockageInterval> readBlockageTruthCsv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  csv::requireColumns(t, kBlockHeader, path.string());
  const std::string what = path.filename().string();
  std::vector<BlockageInterval> out;
  for (const auto& r : t.rows)
    out.push_back({static_cast<int>(csv::toInt(r[t.column("led_id")], what)),
                   csv::toDouble(r[t.column("start_s")], what), csv::toDouble(r[t.column("end_s")], what)});
  return out;
}

void writeJson(const std::filesystem::path& path, const nlohmann::json& j) {
  csv::writeText(path, j.dump(2) + "\n");
}

std::map<std::string, std::string> writeDataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  writeImuCsv(dir / "imu.csv", d.imu);
  writeRawRssCsv(dir / "rss_raw.csv", d.rss_raw);
  writeEpochRssCsv(dir / "rss_epoch.csv", d.rss_epoch);
  writeStatesCsv(dir / "truth.csv", d.truth);
  csv::Writer b(kBlockHeader);
  for (const auto& x : d.scenario.blockages) {
    b << x.led_id << x.start << x.end;
    b.endRow();
  }
  b.save(dir / "blockage_truth.csv");
  saveLedMap(dir / "leds.json", d.scenario.leds);
  writeJson(dir / "scenario.json", d.scenario);

  std::map<std::string, std::string> hashes;
  for (const char* f : {"imu.csv", "rss_raw.csv", "rss_epoch.csv", "truth.csv", "blockage_truth.csv",
                        "leds.json", "scenario.json"})
    hashes[f] = csv::fnv1aFile(dir / f);
  const double duration = d.truth.empty() ? 0.0 : d.truth.back().timestamp;
  std::size_t epochs = 0;
  for (std::size_t i = 0; i < d.rss_epoch.size(); ++i)
    epochs += i == 0 || d.rss_epoch[i].timestamp != d.rss_epoch[i - 1].timestamp;
  nlohmann::json manifest{{"format_version", kFormatVersion},
                          {"generator", std::string("vlpins ") + kVersion},
                          {"scenario", d.scenario.name},
                          {"seed", d.scenario.seed},
                          {"duration_s", duration},
                          {"epochs", epochs},
                          {"hash", "fnv1a-64"},
                          {"files", hashes}};
  writeJson(dir / "manifest.json", manifest);
  hashes["manifest.json"] = csv::fnv1aFile(dir / "manifest.json");
  return hashes;
}

Dataset readDataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir.string());
  Dataset d;
  d.scenario = loadScenario(dir / "scenario.json");
  if (std::filesystem::exists(dir / "leds.json")) d.scenario.leds = loadLedMap(dir / "leds.json");
  if (std::filesystem::exists(dir / "blockage_truth.csv"))
    d.scenario.blockages = readBlockageTruthCsv(dir / "blockage_truth.csv");
  d.imu = readImuCsv(dir / "imu.csv");
  d.rss_raw = readRawRssCsv(dir / "rss_raw.csv");
  d.rss_epoch = readEpochRssCsv(dir / "rss_epoch.csv", d.scenario.rss.sigma * d.scenario.rss.sigma);
  if (std::filesystem::exists(dir / "truth.csv")) d.truth = readTruthCsv(dir / "truth.csv");
  if (d.imu.empty()) throw ConfigError("dataset has no IMU samples");
  return d;
}

}  // namespace vlpins
