// tbcal: simulate / calibrate / sweep / predict / validate-config.
// Exit codes: 0 ok, 2 ConfigError, 3 DataError, 4 RegimeUnsupported, 1 other.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tbcal/calibrator.hpp"
#include "tbcal/config.hpp"
#include "tbcal/correlator.hpp"
#include "tbcal/errors.hpp"
#include "tbcal/frontend.hpp"
#include "tbcal/oracle.hpp"
#include "tbcal/source.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tbcal;

namespace {

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CurrentTrace load_trace(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return read_trace_csv(path);
  return read_trace(path);
}

struct SimOutput {
  CurrentTrace trace1, trace2;
  std::optional<CurrentTrace> unpumped1, unpumped2;
  PairEventStream events;
};

// Full generation pipeline. Efficiency is applied by thinning the event
// stream, so the synthesis step runs the detectors at eta = 1.
SimOutput run_simulation(const RunConfig& cfg) {
  cfg.validate();
  SourceConfig src = cfg.source.resolved();
  const std::uint64_t seed = src.rng_seed;

  SimOutput out;
  out.events = generate(src);
  Rng ra = make_rng(seed, streams::thin_arm1);
  Rng rb = make_rng(seed, streams::thin_arm2);
  const std::vector<double> kept1 = thin(out.events.arm1_times, cfg.detector1.eta, ra);
  const std::vector<double> kept2 = thin(out.events.arm2_times, cfg.detector2.eta, rb);

  DetectorModel d1 = cfg.detector1, d2 = cfg.detector2;
  d1.eta = 1.0;
  d2.eta = 1.0;
  Rng rd1 = make_rng(seed, streams::detector1);
  Rng rd2 = make_rng(seed, streams::detector2);
  out.trace1 = synthesize_trace(kept1, d1, cfg.acquisition.dt, src.duration, rd1);
  out.trace2 = synthesize_trace(kept2, d2, cfg.acquisition.dt, src.duration, rd2);

  if (cfg.unpumped_run) {
    Rng ru1 = make_rng(seed, streams::unpumped1);
    Rng ru2 = make_rng(seed, streams::unpumped2);
    out.unpumped1 = synthesize_trace({}, d1, cfg.acquisition.dt, src.duration, ru1);
    out.unpumped2 = synthesize_trace({}, d2, cfg.acquisition.dt, src.duration, ru2);
  }

  const std::uint64_t hash = cfg.hash();
  for (CurrentTrace* t : {&out.trace1, &out.trace2}) {
    t->meta.config_hash = hash;
    t->meta.rng_seed = seed;
  }
  out.trace1.meta.detector_id = cfg.detector1.id;
  out.trace2.meta.detector_id = cfg.detector2.id;
  if (out.unpumped1) {
    out.unpumped1->meta = out.trace1.meta;
    out.unpumped2->meta = out.trace2.meta;
  }
  return out;
}

json report_list(const RunConfig& cfg, const CorrelationRecord& cross,
                 const CorrelationRecord& auto1, bool auto1_subtracted, double mean_i1) {
  const SourceConfig src = cfg.source.resolved();
  const double flux = src.mode == SourceMode::Spontaneous
                          ? src.mean_flux
                          : (1.0 + src.gain) * src.seed_flux;
  const double tau_p =
      std::max(cfg.detector1.pulse.width(), cfg.detector2.pulse.width());
  const Regime regime = classify_regime(flux, tau_p, src.gain);

  json reports = json::array();
  for (const auto& sel : cfg.estimators) {
    CalibrationReport rep;
    try {
      switch (sel.kind) {
        case EstimatorKind::RatioSPDC:
        case EstimatorKind::RatioStimulated: {
          RatioOptions opt;
          opt.tau_eval = sel.tau_eval;
          opt.average_band = sel.average_band;
          opt.q2_mean = sel.q2_mean;
          opt.systematics = cfg.systematics;
          rep = sel.kind == EstimatorKind::RatioSPDC
                    ? estimate_ratio_spdc(cross, auto1, sel.excess_noise, sel.q1_mean, opt)
                    : estimate_ratio_stimulated(cross, auto1, sel.excess_noise, sel.q1_mean,
                                                opt);
          if (!auto1_subtracted &&
              (cfg.detector1.dark_rate > 0.0 || cfg.detector1.amplifier_noise > 0.0 ||
               cfg.detector1.background_flux > 0.0))
            rep.notes.push_back(
                "warning: no unpumped trace supplied, background subtraction skipped");
          break;
        }
        case EstimatorKind::IntegratedSPDC:
        case EstimatorKind::IntegratedStimulated: {
          IntegratedOptions opt;
          opt.q2_mean = sel.q2_mean;
          opt.systematics = cfg.systematics;
          rep = sel.kind == EstimatorKind::IntegratedSPDC
                    ? estimate_integrated_spdc(cross, mean_i1, opt)
                    : estimate_integrated_stimulated(cross, mean_i1, opt);
          break;
        }
      }
      rep.regime = regime;
      reports.push_back(rep.to_json());
    } catch (const DegenerateDenominator& e) {
      // surfaced as a report entry, not a crash
      json j;
      j["estimator"] = to_string(sel.kind);
      j["degenerate"] = true;
      j["error"] = e.what();
      reports.push_back(j);
    }
  }
  return reports;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"twin-beam analog detector calibration toolkit"};
  app.require_subcommand(1);
  int threads = 0;  // 0: take the config value
  app.add_option("--threads", threads, "cap internal parallelism");

  std::string config_path, out_dir = ".";
  bool with_events = false, csv_traces = false;
  auto* sim = app.add_subcommand("simulate", "generate traces from a config");
  sim->add_option("config", config_path, "JSON run configuration")->required();
  sim->add_option("--out-dir", out_dir, "output directory");
  sim->add_flag("--events", with_events, "also write the photon event file");
  sim->add_flag("--csv", csv_traces, "write CSV traces alongside the binaries");

  std::string trace1_path, trace2_path, unpumped1_path, unpumped2_path;
  auto* cal = app.add_subcommand("calibrate", "correlate traces and run estimators");
  cal->add_option("config", config_path, "JSON run configuration")->required();
  cal->add_option("--trace1", trace1_path, "arm-1 trace (.tbcal or .csv)");
  cal->add_option("--trace2", trace2_path, "arm-2 trace (.tbcal or .csv)");
  cal->add_option("--unpumped1", unpumped1_path, "arm-1 noise-only trace");
  cal->add_option("--unpumped2", unpumped2_path, "arm-2 noise-only trace");
  cal->add_option("--out-dir", out_dir, "output directory");

  std::vector<double> T_values;
  int repetitions = 30;
  std::string sweep_out = "sweep.csv";
  auto* swp = app.add_subcommand("sweep", "uncertainty versus measurement time");
  swp->add_option("config", config_path, "JSON run configuration")->required();
  swp->add_option("--T", T_values, "measurement times, seconds")->required();
  swp->add_option("--repetitions", repetitions, "pipeline repetitions per T");
  swp->add_option("--out", sweep_out, "output CSV path");

  auto* prd = app.add_subcommand("predict", "dump the analytic oracle");
  prd->add_option("config", config_path, "JSON run configuration")->required();

  auto* val = app.add_subcommand("validate-config", "parse, validate, print the hash");
  val->add_option("config", config_path, "JSON run configuration")->required();

  CLI11_PARSE(app, argc, argv);

  RunConfig cfg = RunConfig::load(config_path);
  if (threads > 0) cfg.threads = threads;

  if (val->parsed()) {
    cfg.validate();
    json out;
    out["valid"] = true;
    out["config_hash"] = hex_hash(cfg.hash());
    std::cout << out.dump(2) << '\n';
    return 0;
  }

  if (prd->parsed()) {
    cfg.validate();
    const AnalyticPrediction pr = predict(cfg.source, cfg.detector1, cfg.detector2);
    json out;
    out["config_hash"] = hex_hash(cfg.hash());
    out["mean_i1"] = pr.mean_i1;
    out["mean_i2"] = pr.mean_i2;
    out["integral_cross"] = pr.integral_cross;
    out["bunching_term"] = pr.bunching_term;
    out["auto1_zero_lag"] = pr.auto1(0.0);
    out["auto2_zero_lag"] = pr.auto2(0.0);
    out["cross_zero_lag"] = pr.cross(0.0);
    std::cout << out.dump(2) << '\n';
    return 0;
  }

  if (sim->parsed()) {
    const SimOutput out = run_simulation(cfg);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_trace((dir / "trace1.tbcal").string(), out.trace1);
    write_trace((dir / "trace2.tbcal").string(), out.trace2);
    if (csv_traces) {
      write_trace_csv((dir / "trace1.csv").string(), out.trace1);
      write_trace_csv((dir / "trace2.csv").string(), out.trace2);
    }
    if (out.unpumped1) {
      write_trace((dir / "unpumped1.tbcal").string(), *out.unpumped1);
      write_trace((dir / "unpumped2.tbcal").string(), *out.unpumped2);
    }
    if (with_events) write_events((dir / "events.tbevt").string(), out.events);
    json echo;
    echo["config_hash"] = hex_hash(cfg.hash());
    echo["rng_seed"] = cfg.source.resolved().rng_seed;
    echo["resolved"] = cfg.to_json();
    echo["outputs"] = {(dir / "trace1.tbcal").string(), (dir / "trace2.tbcal").string()};
    std::cout << echo.dump(2) << '\n';
    return 0;
  }

  if (swp->parsed()) {
    cfg.validate();
    SweepConfig sc;
    sc.source = cfg.source;
    sc.detector1 = cfg.detector1;
    sc.detector2 = cfg.detector2;
    sc.dt = cfg.acquisition.dt;
    sc.tau_max = cfg.acquisition.tau_max;
    sc.n_segments = cfg.acquisition.n_segments;
    sc.threads = cfg.threads;
    const SweepResult r = run_uncertainty_sweep(sc, T_values, repetitions);
    write_sweep_csv(sweep_out, r);
    json out;
    out["slope"] = r.slope;
    out["intercept"] = r.intercept;
    out["fit_valid"] = r.fit_valid;
    out["output"] = sweep_out;
    std::cout << out.dump(2) << '\n';
    return 0;
  }

  // calibrate
  cfg.validate();
  CurrentTrace t1, t2;
  std::optional<CurrentTrace> u1, u2;
  if (!trace1_path.empty() != !trace2_path.empty())
    throw ConfigError("calibrate: --trace1 and --trace2 must be given together");
  if (!trace1_path.empty()) {
    t1 = load_trace(trace1_path);
    t2 = load_trace(trace2_path);
    if (!unpumped1_path.empty()) u1 = load_trace(unpumped1_path);
    if (!unpumped2_path.empty()) u2 = load_trace(unpumped2_path);
  } else {
    SimOutput out = run_simulation(cfg);
    t1 = std::move(out.trace1);
    t2 = std::move(out.trace2);
    u1 = std::move(out.unpumped1);
    u2 = std::move(out.unpumped2);
  }

  const CorrelationRecord cross =
      covariance(t1, t2, cfg.acquisition.tau_max, cfg.acquisition.n_segments, cfg.threads);
  CorrelationRecord auto1 =
      auto_covariance(t1, cfg.acquisition.tau_max, cfg.acquisition.n_segments, cfg.threads);
  bool auto1_subtracted = false;
  if (u1) {
    const CorrelationRecord noise1 = auto_covariance(
        *u1, cfg.acquisition.tau_max, cfg.acquisition.n_segments, cfg.threads);
    auto1 = subtract_background(auto1, noise1);
    auto1_subtracted = true;
  }

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  json provenance;
  provenance["config_hash"] = hex_hash(cfg.hash());
  provenance["rng_seed"] = cfg.source.resolved().rng_seed;
  write_record_csv((dir / "cross.csv").string(), cross);
  write_record_sidecar((dir / "cross.json").string(), cross, provenance.dump());
  write_record_csv((dir / "auto1.csv").string(), auto1);
  write_record_sidecar((dir / "auto1.json").string(), auto1, provenance.dump());

  json report;
  report["config_hash"] = hex_hash(cfg.hash());
  report["rng_seed"] = cfg.source.resolved().rng_seed;
  report["mean_i1"] = t1.mean();
  report["mean_i2"] = t2.mean();
  report["unpumped_subtracted"] = auto1_subtracted;
  report["estimates"] = report_list(cfg, cross, auto1, auto1_subtracted, t1.mean());
  std::ofstream os(dir / "report.json");
  if (!os) throw DataError("cannot open report.json for writing");
  os << report.dump(2) << '\n';
  std::cout << report.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const RegimeUnsupported& e) {
    std::cerr << "regime unsupported: " << e.what() << '\n';
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
