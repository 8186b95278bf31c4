#include "vlpins/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "vlpins/csv.hpp"
#include "vlpins/errors.hpp"

namespace vlpins {

namespace {

constexpr double kRad2Deg = 180.0 / std::numbers::pi;

// Angle between the vertical as seen from each attitude; heading-independent.
double inclinationError(const Quat& a, const Quat& b) {
  const Vec3 na = a.toRotationMatrix().row(2).transpose(), nb = b.toRotationMatrix().row(2).transpose();
  return std::atan2(na.cross(nb).norm(), na.dot(nb));
}

double wrap(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

std::vector<std::pair<const NavState*, const NavState*>> alignToTruth(std::span<const NavState> est,
                                                                      std::span<const NavState> truth,
                                                                      double max_skew) {
  std::vector<std::pair<const NavState*, const NavState*>> out;
  if (truth.empty() || est.empty()) throw ConfigError("evaluation needs both an estimate and ground truth");
  for (const auto& x : est) {
    auto it = std::lower_bound(truth.begin(), truth.end(), x.timestamp,
                               [](const NavState& s, double t) { return s.timestamp < t; });
    const NavState* best = nullptr;
    double skew = max_skew;
    for (auto c : {it, it == truth.begin() ? it : it - 1}) {
      if (c == truth.end()) continue;
      const double d = std::abs(c->timestamp - x.timestamp);
      if (d <= skew) {
        skew = d;
        best = &*c;
      }
    }
    if (best) out.emplace_back(&x, best);
  }
  if (out.empty()) throw ConfigError("estimate and ground truth do not overlap in time");
  return out;
}

std::vector<double> positionErrors(std::span<const NavState> est, std::span<const NavState> truth, bool planar,
                                   double max_skew) {
  std::vector<double> e;
  for (const auto& [x, t] : alignToTruth(est, truth, max_skew))
    e.push_back(planar ? (x->p - t->p).head<2>().norm() : (x->p - t->p).norm());
  return e;
}

ErrorStats computeErrors(std::span<const NavState> est, std::span<const NavState> truth, double max_skew) {
  ErrorStats s;
  const auto pairs = alignToTruth(est, truth, max_skew);
  for (const auto& [x, t] : pairs) {
    const double e2 = (x->p - t->p).head<2>().norm();
    const double e3 = (x->p - t->p).norm();
    const double inc = inclinationError(x->q, t->q) * kRad2Deg;
    const Vec3 ex = attitude::toEuler(x->q), et = attitude::toEuler(t->q);
    const double head = std::abs(wrap(ex.z() - et.z())) * kRad2Deg;
    s.mean_2d += e2;
    s.mean_3d += e3;
    s.rms_2d += e2 * e2;
    s.rms_3d += e3 * e3;
    s.max_2d = std::max(s.max_2d, e2);
    s.max_3d = std::max(s.max_3d, e3);
    s.mean_inclination_deg += inc;
    s.max_inclination_deg = std::max(s.max_inclination_deg, inc);
    s.mean_roll_deg += std::abs(wrap(ex.x() - et.x())) * kRad2Deg;
    s.mean_pitch_deg += std::abs(wrap(ex.y() - et.y())) * kRad2Deg;
    s.mean_heading_deg += head;
    s.max_heading_deg = std::max(s.max_heading_deg, head);
  }
  const double n = static_cast<double>(pairs.size());
  s.samples = static_cast<int>(pairs.size());
  s.mean_2d /= n;
  s.mean_3d /= n;
  s.rms_2d = std::sqrt(s.rms_2d / n);
  s.rms_3d = std::sqrt(s.rms_3d / n);
  s.mean_inclination_deg /= n;
  s.mean_roll_deg /= n;
  s.mean_pitch_deg /= n;
  s.mean_heading_deg /= n;
  return s;
}

std::vector<CdfPoint> empiricalCdf(std::vector<double> errors) {
  std::vector<CdfPoint> out;
  std::sort(errors.begin(), errors.end());
  const double n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double f = static_cast<double>(i + 1) / n;
    if (!out.empty() && out.back().error == errors[i])
      out.back().fraction = f;
    else
      out.push_back({errors[i], f});
  }
  if (!out.empty()) out.back().fraction = 1.0;
  return out;
}

DetectionScore scoreDetection(std::span<const TaggedRawSample> tagged, std::span<const BlockageInterval> schedule,
                              std::span<const RssSample> flagged_epochs, std::span<const RssSample> truth_epochs,
                              double raw_rate) {
  DetectionScore d;
  const double tol = 2.0 / raw_rate;
  struct Run {
    double start, end;
    bool closed;
  };
  std::map<int, std::vector<Run>> runs;
  std::map<int, std::vector<double>> coverage;
  std::map<int, bool> open;
  for (const auto& s : tagged) {
    coverage[s.led_id].push_back(s.timestamp);
    const bool blocked = s.tag == BlockageTag::Blocked;
    auto& r = runs[s.led_id];
    if (blocked && !open[s.led_id]) r.push_back({s.timestamp, s.timestamp, false});
    if (blocked) r.back().end = s.timestamp;
    if (!blocked && open[s.led_id]) r.back().closed = true;
    open[s.led_id] = blocked;
  }
  auto overlaps = [&](int led, double a, double b) {
    for (const auto& iv : schedule)
      if (iv.led_id == led && a <= iv.end + tol && b >= iv.start - tol) return true;
    return false;
  };
  for (const auto& iv : schedule) {
    const auto& cov = coverage[iv.led_id];
    const bool observed = std::any_of(cov.begin(), cov.end(), [&](double t) { return t > iv.start && t <= iv.end; });
    if (!observed) continue;
    ++d.truth_intervals;
    const auto& r = runs[iv.led_id];
    if (std::any_of(r.begin(), r.end(), [&](const Run& x) { return x.start <= iv.end + tol && x.end >= iv.start - tol; }))
      ++d.recalled;
  }
  for (const auto& [led, list] : runs)
    for (const auto& r : list) {
      ++d.detections;
      if (overlaps(led, r.start, r.end))
        ++d.true_detections;
      else
        d.false_transitions += r.closed ? 2 : 1;
    }
  d.recall = d.truth_intervals ? static_cast<double>(d.recalled) / d.truth_intervals : 1.0;
  d.precision = d.detections ? static_cast<double>(d.true_detections) / d.detections : 1.0;

  std::map<std::pair<double, int>, RssFlag> truth;
  for (const auto& e : truth_epochs) truth[{e.timestamp, e.led_id}] = e.flag;
  for (const auto& e : flagged_epochs) {
    const auto it = truth.find({e.timestamp, e.led_id});
    const bool t = it != truth.end() && it->second == RssFlag::Blocked;
    const bool f = e.flag == RssFlag::Blocked;
    d.truth_blocked_epochs += t;
    d.flagged_blocked_epochs += f;
    d.correct_blocked_epochs += t && f;
  }
  return d;
}

std::vector<LedLocationError> scoreLeds(std::span<const UnknownLedEstimate> est, std::span<const LedBeacon> truth) {
  std::vector<LedLocationError> out;
  for (const auto& e : est) {
    const LedBeacon* t = findLed(truth, e.id);
    if (!t) continue;
    LedLocationError l;
    l.id = e.id;
    l.estimate = e.position;
    l.truth = t->position.head<2>();
    l.error = (l.estimate - l.truth).norm();
    l.max_covariance = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(e.covariance).eigenvalues().maxCoeff();
    l.flagged = e.flagged;
    l.dop = e.dop;
    out.push_back(l);
  }
  return out;
}

RunReport makeReport(const RunResult& r, const Dataset& d, std::span<const LedBeacon> truth_leds,
                     double runtime_s) {
  if (d.truth.empty()) throw ConfigError("dataset has no truth trajectory to evaluate against");
  RunReport rep;
  rep.mode = toString(r.mode);
  rep.trajectory = "causal";
  rep.epochs = static_cast<int>(r.diagnostics.size());
  rep.nonconverged_epochs =
      static_cast<int>(std::ranges::count_if(r.diagnostics, [](const auto& e) { return !e.converged; }));
  rep.vlp_failures = r.vlp_failures;
  rep.errors = computeErrors(r.causal, d.truth);
  if (!r.smoothed.empty()) rep.smoothed = computeErrors(r.smoothed, d.truth);
  rep.cdf_2d = empiricalCdf(positionErrors(r.causal, d.truth, true));
  rep.cdf_3d = empiricalCdf(positionErrors(r.causal, d.truth, false));
  if (!r.tagged.empty())
    rep.detection = scoreDetection(r.tagged, d.scenario.blockages, r.flagged, d.rss_epoch, d.scenario.rates.raw_rss);
  rep.leds = scoreLeds(r.unknown_leds, truth_leds);
  rep.flagged = rep.nonconverged_epochs > 0 || std::ranges::any_of(rep.leds, [](const auto& l) { return l.flagged; });
  rep.runtime_s = runtime_s;
  return rep;
}

void to_json(nlohmann::json& j, const ErrorStats& e) {
  j = nlohmann::json{{"samples", e.samples},
                     {"mean_2d_m", e.mean_2d},
                     {"max_2d_m", e.max_2d},
                     {"rms_2d_m", e.rms_2d},
                     {"mean_3d_m", e.mean_3d},
                     {"max_3d_m", e.max_3d},
                     {"rms_3d_m", e.rms_3d},
                     {"mean_inclination_deg", e.mean_inclination_deg},
                     {"max_inclination_deg", e.max_inclination_deg},
                     {"mean_roll_deg", e.mean_roll_deg},
                     {"mean_pitch_deg", e.mean_pitch_deg},
                     {"mean_heading_deg", e.mean_heading_deg},
                     {"max_heading_deg", e.max_heading_deg}};
}

void from_json(const nlohmann::json& j, ErrorStats& e) {
  e.samples = j.at("samples").get<int>();
  e.mean_2d = j.at("mean_2d_m").get<double>();
  e.max_2d = j.at("max_2d_m").get<double>();
  e.rms_2d = j.at("rms_2d_m").get<double>();
  e.mean_3d = j.at("mean_3d_m").get<double>();
  e.max_3d = j.at("max_3d_m").get<double>();
  e.rms_3d = j.at("rms_3d_m").get<double>();
  e.mean_inclination_deg = j.at("mean_inclination_deg").get<double>();
  e.max_inclination_deg = j.at("max_inclination_deg").get<double>();
  e.mean_roll_deg = j.at("mean_roll_deg").get<double>();
  e.mean_pitch_deg = j.at("mean_pitch_deg").get<double>();
  e.mean_heading_deg = j.at("mean_heading_deg").get<double>();
  e.max_heading_deg = j.at("max_heading_deg").get<double>();
}

namespace {

nlohmann::json cdfJson(const std::vector<CdfPoint>& c) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : c) a.push_back({p.error, p.fraction});
  return a;
}

std::vector<CdfPoint> cdfFromJson(const nlohmann::json& j) {
  std::vector<CdfPoint> c;
  for (const auto& p : j) c.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return c;
}

}  // namespace

void to_json(nlohmann::json& j, const RunReport& r) {
  j = nlohmann::json{{"schema", "vlpins-run-report/1"},
                     {"mode", r.mode},
                     {"trajectory", r.trajectory},
                     {"epochs", r.epochs},
                     {"nonconverged_epochs", r.nonconverged_epochs},
                     {"vlp_failures", r.vlp_failures},
                     {"flagged", r.flagged},
                     {"errors", r.errors},
                     {"cdf_2d", cdfJson(r.cdf_2d)},
                     {"cdf_3d", cdfJson(r.cdf_3d)}};
  if (r.smoothed) j["smoothed_errors"] = *r.smoothed;
  if (r.detection) {
    const auto& d = *r.detection;
    j["blockage_detection"] = {{"truth_intervals", d.truth_intervals},
                               {"recalled", d.recalled},
                               {"detections", d.detections},
                               {"true_detections", d.true_detections},
                               {"false_transitions", d.false_transitions},
                               {"recall", d.recall},
                               {"precision", d.precision},
                               {"truth_blocked_epochs", d.truth_blocked_epochs},
                               {"flagged_blocked_epochs", d.flagged_blocked_epochs},
                               {"correct_blocked_epochs", d.correct_blocked_epochs}};
  }
  if (!r.leds.empty()) {
    auto& a = j["unknown_leds"] = nlohmann::json::array();
    for (const auto& l : r.leds)
      a.push_back({{"id", l.id},
                   {"estimate", {l.estimate.x(), l.estimate.y()}},
                   {"truth", {l.truth.x(), l.truth.y()}},
                   {"error_m", l.error},
                   {"max_covariance_m2", l.max_covariance},
                   {"flagged", l.flagged},
                   {"dop", std::isfinite(l.dop) ? nlohmann::json(l.dop) : nlohmann::json("inf")}});
  }
}

void from_json(const nlohmann::json& j, RunReport& r) {
  try {
    if (j.at("schema").get<std::string>() != "vlpins-run-report/1") throw ConfigError("unsupported report schema");
    r = RunReport{};
    r.mode = j.at("mode").get<std::string>();
    r.trajectory = j.at("trajectory").get<std::string>();
    r.epochs = j.at("epochs").get<int>();
    r.nonconverged_epochs = j.at("nonconverged_epochs").get<int>();
    r.vlp_failures = j.at("vlp_failures").get<int>();
    r.flagged = j.at("flagged").get<bool>();
    r.errors = j.at("errors").get<ErrorStats>();
    r.cdf_2d = cdfFromJson(j.at("cdf_2d"));
    r.cdf_3d = cdfFromJson(j.at("cdf_3d"));
    if (j.contains("smoothed_errors")) r.smoothed = j.at("smoothed_errors").get<ErrorStats>();
    if (j.contains("blockage_detection")) {
      const auto& b = j.at("blockage_detection");
      DetectionScore d;
      d.truth_intervals = b.at("truth_intervals").get<int>();
      d.recalled = b.at("recalled").get<int>();
      d.detections = b.at("detections").get<int>();
      d.true_detections = b.at("true_detections").get<int>();
      d.false_transitions = b.at("false_transitions").get<int>();
      d.recall = b.at("recall").get<double>();
      d.precision = b.at("precision").get<double>();
      d.truth_blocked_epochs = b.at("truth_blocked_epochs").get<int>();
      d.flagged_blocked_epochs = b.at("flagged_blocked_epochs").get<int>();
      d.correct_blocked_epochs = b.at("correct_blocked_epochs").get<int>();
      r.detection = d;
    }
    if (j.contains("unknown_leds"))
      for (const auto& a : j.at("unknown_leds")) {
        LedLocationError l;
        l.id = a.at("id").get<int>();
        l.estimate = Vec2(a.at("estimate").at(0).get<double>(), a.at("estimate").at(1).get<double>());
        l.truth = Vec2(a.at("truth").at(0).get<double>(), a.at("truth").at(1).get<double>());
        l.error = a.at("error_m").get<double>();
        l.max_covariance = a.at("max_covariance_m2").get<double>();
        l.flagged = a.at("flagged").get<bool>();
        l.dop = a.at("dop").is_string() ? std::numeric_limits<double>::infinity() : a.at("dop").get<double>();
        r.leds.push_back(l);
      }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run report: ") + e.what());
  }
  for (const auto* c : {&r.cdf_2d, &r.cdf_3d}) {
    for (std::size_t i = 1; i < c->size(); ++i)
      if ((*c)[i].fraction < (*c)[i - 1].fraction || (*c)[i].error < (*c)[i - 1].error)
        throw ConfigError("run report: CDF is not monotone");
    if (!c->empty() && c->back().fraction != 1.0) throw ConfigError("run report: CDF does not end at 1");
  }
}

std::string cdfCsv(const RunReport& r) {
  csv::Writer w({"kind", "error_m", "fraction"});
  for (const auto& p : r.cdf_2d) {
    w << std::string("2d") << p.error << p.fraction;
    w.endRow();
  }
  for (const auto& p : r.cdf_3d) {
    w << std::string("3d") << p.error << p.fraction;
    w.endRow();
  }
  return w.text();
}

}  // namespace vlpins
