#include "vlpins/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "vlpins/csv.hpp"
#include "vlpins/dataset.hpp"
#include "vlpins/errors.hpp"
#include "vlpins/evaluation.hpp"
#include "vlpins/pipeline.hpp"

namespace vlpins {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string scenario, dataset, config, mode = "TC", out, trajectory, truth;
  std::optional<std::uint64_t> seed;
  bool no_drd = false;
  std::optional<int> window;
  std::vector<int> unknown_leds;
};

nlohmann::json readJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json hashesOf(const fs::path& dir, std::initializer_list<const char*> files) {
  nlohmann::json h = nlohmann::json::object();
  for (const char* f : files)
    if (fs::exists(dir / f)) h[f] = csv::fnv1aFile(dir / f);
  return h;
}

void writeDiagnosticsCsv(const fs::path& path, std::span<const EpochDiagnostics> diag,
                         const std::vector<int>& unknown) {
  std::vector<std::string> header{"timestamp", "initial_cost", "cost",         "iterations",
                                  "converged", "los_count",    "down_weighted"};
  for (int id : unknown) header.push_back("dop_led" + std::to_string(id));
  csv::Writer w(header);
  for (const auto& e : diag) {
    w << e.timestamp << e.initial_cost << e.cost << e.iterations << (e.converged ? 1 : 0) << e.los_count
      << e.down_weighted;
    for (int id : unknown) {
      const auto it = e.led_dop.find(id);
      w << (it == e.led_dop.end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
    }
    w.endRow();
  }
  w.save(path);
}

void writeReport(const fs::path& out, const RunReport& rep) {
  writeJson(out / "report.json", rep);
  csv::writeText(out / "cdf.csv", cdfCsv(rep));
}

int simulateCmd(const Options& o, std::ostream& out) {
  const Scenario sc = loadScenario(o.scenario);
  const Dataset d = simulate(sc, o.seed);
  writeDataset(d, o.out);
  out << "wrote " << d.truth.size() << " truth samples, " << d.rss_epoch.size() << " epoch values to " << o.out
      << " (seed " << d.scenario.seed << ")\n";
  return kExitOk;
}

int estimateCmd(const Options& o, std::ostream& out) {
  const fs::path dir = o.dataset, dst = o.out;
  const Dataset d = readDataset(dir);
  RunConfig cfg = resolveRunConfig(d.scenario, o.config.empty() ? nlohmann::json::object() : readJsonFile(o.config));
  if (o.no_drd) cfg.use_drd = false;
  if (o.window) cfg.estimator.window = cfg.estimator.window_unknown_leds = *o.window;
  if (!o.unknown_leds.empty()) cfg.estimator.unknown_leds = o.unknown_leds;
  cfg.validate();
  const RunMode mode = runModeFromString(o.mode);

  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = runEstimation(d, cfg, mode);
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(dst);
  writeJson(dst / "config.json", cfg);
  writeStatesCsv(dst / "trajectory_causal.csv", r.causal);
  if (!r.smoothed.empty()) writeStatesCsv(dst / "trajectory_smoothed.csv", r.smoothed);
  writeDiagnosticsCsv(dst / "diagnostics.csv", r.diagnostics, cfg.estimator.unknown_leds);
  writeDetectionsCsv(dst / "detections.csv", r.tagged);

  nlohmann::json info{{"generator", std::string("vlpins ") + kVersion},
                      {"format_version", kFormatVersion},
                      {"mode", toString(mode)},
                      {"dataset", dir.string()},
                      {"inputs", hashesOf(dir, {"manifest.json", "imu.csv", "rss_raw.csv", "rss_epoch.csv",
                                                "leds.json", "scenario.json"})},
                      {"config_hash", csv::fnv1aFile(dst / "config.json")},
                      {"runtime_s", runtime}};
  if (o.seed) info["seed"] = *o.seed;

  if (!d.truth.empty()) {
    const auto truth_leds = loadScenario(dir / "scenario.json").leds;
    const RunReport rep = makeReport(r, d, truth_leds, runtime);
    writeReport(dst, rep);
    info["flagged"] = rep.flagged;
    out << toString(mode) << ": mean 2-D " << rep.errors.mean_2d << " m, mean 3-D " << rep.errors.mean_3d
        << " m, inclination " << rep.errors.mean_inclination_deg << " deg over " << rep.epochs << " epochs";
    if (rep.flagged) out << " [flagged]";
    out << '\n';
  } else {
    out << toString(mode) << ": " << r.causal.size() << " states, no truth to evaluate against\n";
  }
  writeJson(dst / "run_info.json", info);
  return kExitOk;
}

int evaluateCmd(const Options& o, std::ostream& out) {
  const auto est = readTruthCsv(o.trajectory);
  const auto truth = readTruthCsv(o.truth);
  RunReport rep;
  rep.mode = "external";
  rep.trajectory = fs::path(o.trajectory).filename().string();
  rep.epochs = static_cast<int>(est.size());
  rep.errors = computeErrors(est, truth);
  rep.cdf_2d = empiricalCdf(positionErrors(est, truth, true));
  rep.cdf_3d = empiricalCdf(positionErrors(est, truth, false));
  fs::create_directories(o.out);
  writeReport(o.out, rep);
  out << "mean 2-D " << rep.errors.mean_2d << " m, mean 3-D " << rep.errors.mean_3d << " m over "
      << rep.errors.samples << " samples\n";
  return kExitOk;
}

}  // namespace

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visible light positioning with inertial integration"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Synthesize a dataset from a scenario file");
  sim->add_option("--scenario", o.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", o.seed, "Override the scenario seed");
  sim->add_option("--out", o.out, "Dataset directory")->required();

  auto* est = app.add_subcommand("estimate", "Run TC, LC or VLP_ONLY on a dataset");
  est->add_option("--dataset", o.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  est->add_option("--config", o.config, "Estimator config JSON, merged over scenario defaults")
      ->check(CLI::ExistingFile);
  est->add_option("--mode", o.mode, "TC, LC or VLP_ONLY")->capture_default_str();
  est->add_option("--seed", o.seed, "Recorded in run_info.json; estimation is deterministic");
  est->add_flag("--no-drd", o.no_drd, "Disable blockage detection");
  est->add_option("--window", o.window, "Sliding-window length in epochs")->check(CLI::PositiveNumber);
  est->add_option("--unknown-leds", o.unknown_leds, "LED ids whose planar position is estimated")->delimiter(',');
  est->add_option("--out", o.out, "Output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Score a trajectory CSV against truth");
  ev->add_option("--trajectory", o.trajectory, "Estimated trajectory CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", o.truth, "Truth trajectory CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", o.out, "Output directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return simulateCmd(o, out);
    if (est->parsed()) return estimateCmd(o, out);
    return evaluateCmd(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace vlpins
