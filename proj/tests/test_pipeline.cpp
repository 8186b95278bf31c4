#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "test_util.hpp"
#include "vlpins/errors.hpp"
#include "vlpins/evaluation.hpp"
#include "vlpins/factors.hpp"
#include "vlpins/pipeline.hpp"

using namespace vlpins;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Scenario quiet(const std::string& name) {
  Scenario s = referenceScenario(name);
  s.imu = ImuNoiseSpec{};
  s.rss = {0.0, 0.0};
  return s;
}

const Dataset& sim3d() {
  static const Dataset d = simulate(referenceScenario("sim3d"));
  return d;
}

const NavState& truthAt(const Dataset& d, double t) {
  auto it = std::lower_bound(d.truth.begin(), d.truth.end(), t - 1e-9,
                             [](const NavState& s, double x) { return s.timestamp < x; });
  return *it;
}

std::map<double, std::vector<RssSample>> epochsByTime(const Dataset& d) {
  std::map<double, std::vector<RssSample>> m;
  for (const auto& s : d.rss_epoch) m[s.timestamp].push_back(s);
  return m;
}

}  // namespace

TEST(RunConfig, ModeParsing) {
  EXPECT_EQ(runModeFromString("TC"), RunMode::TightlyCoupled);
  EXPECT_EQ(runModeFromString("lc"), RunMode::LooselyCoupled);
  EXPECT_EQ(runModeFromString("VLP_ONLY"), RunMode::VlpOnly);
  EXPECT_EQ(toString(RunMode::VlpOnly), "VLP_ONLY");
  EXPECT_THROW(runModeFromString("EKF"), ConfigError);
}

TEST(RunConfig, DefaultsFollowScenario) {
  const Scenario s = referenceScenario("sim3d");
  const RunConfig a = defaultRunConfig(s);
  EXPECT_TRUE(a.estimator.constraints.nhc_vertical);
  EXPECT_FALSE(a.estimator.constraints.height);
  EXPECT_FALSE(a.vlp_tilt);
  EXPECT_DOUBLE_EQ(a.estimator.rss_sigma, 0.1);
  EXPECT_DOUBLE_EQ(a.drd.min_signal, 12.0 * 0.1 * 120.0);
  EXPECT_DOUBLE_EQ(a.drd.v_max, s.trajectory.max_speed);

  const RunConfig b = defaultRunConfig(referenceScenario("expA"));
  EXPECT_FALSE(b.estimator.constraints.nhc_vertical);
  EXPECT_TRUE(b.estimator.constraints.height);
  EXPECT_TRUE(b.vlp_tilt);
}

TEST(RunConfig, JsonRoundTripAndMerge) {
  const Scenario s = referenceScenario("expA");
  RunConfig c = defaultRunConfig(s);
  c.use_drd = false;
  c.drd.mode = DrdMode::Planar;
  c.lc_min_fix_sigma = 0.05;
  const nlohmann::json j = c;
  EXPECT_EQ(nlohmann::json(j.get<RunConfig>()), j);

  const RunConfig m = resolveRunConfig(s, {{"window", 12}, {"drd", {{"enabled", false}}}});
  EXPECT_EQ(m.estimator.window, 12);
  EXPECT_FALSE(m.use_drd);
  EXPECT_DOUBLE_EQ(m.drd.min_signal, c.drd.min_signal);
  EXPECT_TRUE(m.estimator.constraints.height);

  EXPECT_THROW(resolveRunConfig(s, {{"window", 1}}), ConfigError);
  EXPECT_THROW(resolveRunConfig(s, {{"drd", {{"mode", "4d"}}}}), ConfigError);
  EXPECT_THROW(resolveRunConfig(s, nlohmann::json::array()), ConfigError);
}

TEST(Pipeline, UnknownLedIdMustExist) {
  RunConfig c = defaultRunConfig(sim3d().scenario);
  c.estimator.unknown_leds = {42};
  EXPECT_THROW(runEstimation(sim3d(), c, RunMode::TightlyCoupled), ConfigError);
}

TEST(Pipeline, NoiselessTcIsSubMillimetre) {
  const Dataset d = simulate(quiet("sim3d"));
  const RunResult r = runEstimation(d, defaultRunConfig(d.scenario), RunMode::TightlyCoupled);
  ASSERT_EQ(r.causal.size(), epochsByTime(d).size());
  const ErrorStats e = computeErrors(r.causal, d.truth);
  EXPECT_LT(e.mean_3d, 1e-3);
  EXPECT_LT(e.max_inclination_deg, 0.01);
}

TEST(Pipeline, PerturbedStartRecoversTruth) {
  const Dataset d = simulate(quiet("sim3d"));
  EstimatorConfig cfg = defaultRunConfig(d.scenario).estimator;
  cfg.rss_sigma = 1e-3;
  SlidingWindowEstimator est(cfg, d.scenario.leds, d.scenario.receiver);
  const auto epochs = epochsByTime(d);
  auto it = epochs.begin();
  NavState x0 = truthAt(d, it->first);
  x0.p += Vec3(0.03, -0.03, 0.028);
  x0.q = x0.q * attitude::fromEuler(1.2 * kDeg, -1.2 * kDeg, 1.0 * kDeg);
  est.initialize(x0, it->second);
  double t_prev = it->first;
  for (++it; it != epochs.end() && it->first < 30.0; ++it) {
    est.addEpoch(it->first, imuSlice(d.imu, t_prev, it->first), it->second);
    t_prev = it->first;
  }
  for (const auto& x : est.windowStates()) {
    const NavState& t = truthAt(d, x.timestamp);
    EXPECT_LT((x.p - t.p).norm(), 1e-6) << x.timestamp;
    EXPECT_LT(attitude::logMap(t.q.conjugate() * x.q).norm(), 1e-6) << x.timestamp;
  }
}

TEST(Pipeline, WindowLengthConstantAcrossSlides) {
  const Dataset& d = sim3d();
  EstimatorConfig cfg = defaultRunConfig(d.scenario).estimator;
  cfg.window = 5;
  SlidingWindowEstimator est(cfg, d.scenario.leds, d.scenario.receiver);
  const auto epochs = epochsByTime(d);
  auto it = epochs.begin();
  est.initialize(truthAt(d, it->first), it->second);
  double t_prev = it->first;
  int slides = 0;
  for (++it; it != epochs.end(); ++it) {
    est.addEpoch(it->first, imuSlice(d.imu, t_prev, it->first), it->second);
    t_prev = it->first;
    const auto n = est.windowStates().size();
    if (n == 5u) ++slides;
    ASSERT_LE(n, 5u);
  }
  EXPECT_GE(slides, 70);
  EXPECT_EQ(est.smoothed().size(), epochs.size());
}

TEST(Pipeline, DrdRecoversInjectedBlockages) {
  const Dataset& d = sim3d();
  const RunResult r = runEstimation(d, defaultRunConfig(d.scenario), RunMode::TightlyCoupled);
  const DetectionScore s =
      scoreDetection(r.tagged, d.scenario.blockages, r.flagged, d.rss_epoch, d.scenario.rates.raw_rss);
  EXPECT_EQ(s.truth_intervals, static_cast<int>(d.scenario.blockages.size()));
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.false_transitions, 0);
  EXPECT_EQ(s.correct_blocked_epochs, s.truth_blocked_epochs);
  EXPECT_EQ(s.flagged_blocked_epochs, s.truth_blocked_epochs);
}

TEST(Pipeline, DisablingDrdDegradesBlockedRun) {
  const Dataset& d = sim3d();
  RunConfig c = defaultRunConfig(d.scenario);
  const double with = computeErrors(runEstimation(d, c, RunMode::TightlyCoupled).causal, d.truth).mean_3d;
  c.use_drd = false;
  const double without = computeErrors(runEstimation(d, c, RunMode::TightlyCoupled).causal, d.truth).mean_3d;
  EXPECT_GT(without, 3.0 * with);
}

TEST(Pipeline, DownWeightingMatchesExclusion) {
  const Dataset& d = sim3d();
  RunConfig c = defaultRunConfig(d.scenario);
  const RunResult a = runEstimation(d, c, RunMode::TightlyCoupled);
  c.estimator.blocked_policy = BlockedPolicy::Exclude;
  const RunResult b = runEstimation(d, c, RunMode::TightlyCoupled);
  ASSERT_EQ(a.smoothed.size(), b.smoothed.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.smoothed.size(); ++i)
    worst = std::max(worst, (a.smoothed[i].p - b.smoothed[i].p).norm());
  EXPECT_LT(worst, 1e-3);
}

TEST(Pipeline, HeadingComesFromTheImu) {
  const Dataset d = simulate(referenceScenario("expA_clean"));
  const RunConfig c = defaultRunConfig(d.scenario);
  const ErrorStats tc = computeErrors(runEstimation(d, c, RunMode::TightlyCoupled).causal, d.truth);
  const ErrorStats vlp = computeErrors(runEstimation(d, c, RunMode::VlpOnly).causal, d.truth);
  EXPECT_LT(tc.mean_heading_deg, 2.0);
  EXPECT_GT(vlp.mean_heading_deg, 20.0);
}

TEST(Pipeline, VlpOnlyHoldsLastFix) {
  const Dataset& d = sim3d();
  const RunResult r = runEstimation(d, defaultRunConfig(d.scenario), RunMode::VlpOnly);
  EXPECT_EQ(r.causal.size(), epochsByTime(d).size());
  EXPECT_TRUE(r.smoothed.empty());
  EXPECT_LT(computeErrors(r.causal, d.truth).mean_2d, 0.5);
}

TEST(Pipeline, UnknownLedRecoveredOnSpreadTrajectory) {
  const Dataset& d = sim3d();
  RunConfig c = defaultRunConfig(d.scenario);
  c.estimator.unknown_leds = {5};
  auto leds = d.scenario.leds;
  leds[4].position += Vec3(0.3, -0.4, 0.0);
  const RunResult r = runEstimation(d, c, RunMode::TightlyCoupled, leds);
  const auto s = scoreLeds(r.unknown_leds, d.scenario.leds);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_LT(s[0].error, 0.05);
  EXPECT_FALSE(s[0].flagged);
}

TEST(Pipeline, UnknownLedFlaggedWhenStationary) {
  Scenario sc = referenceScenario("expA_normal");
  const Vec3 p = sc.trajectory.waypoints.front().position;
  sc.trajectory.waypoints = {{p, 0.3, 0.0}, {p, 0.3, 0.0}};
  sc.trajectory.end_hold = 40.0;
  const Dataset d = simulate(sc);
  RunConfig c = defaultRunConfig(sc);
  c.estimator.unknown_leds = {3};
  auto leds = sc.leds;
  leds[2].position += Vec3(0.3, -0.4, 0.0);
  const RunResult r = runEstimation(d, c, RunMode::TightlyCoupled, leds);
  ASSERT_EQ(r.unknown_leds.size(), 1u);
  const auto& u = r.unknown_leds[0];
  const double worst = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(u.covariance).eigenvalues().maxCoeff();
  EXPECT_TRUE(u.flagged || worst > 1.0);
  EXPECT_GT(u.dop, c.estimator.unknown_led_max_dop);
}

TEST(Heading, SingleEpochInformationIsNullAlongHeading) {
  std::mt19937 rng(11);
  const Scenario s = referenceScenario("sim3d");
  for (int i = 0; i < 200; ++i) {
    NavState x;
    x.q = test::randomTiltedQuat(rng, 0.4);
    x.p = Vec3(0.5, 0.5, 0.0) + 4.0 * (test::randomVec(rng, 0.5) + Vec3::Constant(0.5)).cwiseProduct(Vec3(1, 1, 0.3));
    const Matrix15 H = rssInformation(x, s.leds, s.receiver, 0.1);
    const Vector15 v = headingNullDirection(x, s.receiver).normalized();
    const double lmax = Eigen::SelfAdjointEigenSolver<Matrix15>(H).eigenvalues().maxCoeff();
    ASSERT_GT(lmax, 0.0);
    EXPECT_LT(v.dot(H * v) / lmax, 1e-12);
  }
}

TEST(Pipeline, RepeatedRunsAreIdentical) {
  const Dataset& d = sim3d();
  const RunConfig c = defaultRunConfig(d.scenario);
  const RunResult a = runEstimation(d, c, RunMode::TightlyCoupled);
  const RunResult b = runEstimation(d, c, RunMode::TightlyCoupled);
  ASSERT_EQ(a.causal.size(), b.causal.size());
  for (std::size_t i = 0; i < a.causal.size(); ++i) {
    EXPECT_EQ(a.causal[i].p, b.causal[i].p);
    EXPECT_EQ(a.causal[i].q.coeffs(), b.causal[i].q.coeffs());
  }
}
