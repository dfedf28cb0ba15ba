#include "tbcal/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tbcal/calibrator.hpp"
#include "tbcal/correlator.hpp"
#include "tbcal/errors.hpp"

namespace tbcal {

AnalyticPrediction predict(const SourceConfig& source0, const DetectorModel& d1,
                           const DetectorModel& d2) {
  const SourceConfig src = source0.resolved();
  d1.validate();
  d2.validate();

  const double e1 = d1.eta, e2 = d2.eta;
  const double q1 = d1.gain.mean, q2 = d2.gain.mean;
  const double q1sq = d1.gain.second_moment(), q2sq = d2.gain.second_moment();
  const PulseShape p1 = d1.pulse, p2 = d2.pulse;

  AnalyticPrediction pr;
  if (src.mode == SourceMode::Spontaneous) {
    const double F = src.mean_flux;
    const double Im = src.gain * F;
    pr.bunching_term = Im;
    pr.mean_i1 = e1 * q1 * F;
    pr.mean_i2 = e2 * q2 * F;
    pr.auto1 = [=](double tau) { return e1 * q1sq * p1.correlation(p1, tau) * (F + e1 * Im); };
    pr.auto2 = [=](double tau) { return e2 * q2sq * p2.correlation(p2, tau) * (F + e2 * Im); };
    pr.cross = [=](double tau) {
      return e1 * e2 * q1 * q2 * p1.correlation(p2, tau) * (F + Im);
    };
    pr.integral_cross = e1 * e2 * q1 * q2 * (F + Im);  // integral of F12 is 1
  } else {
    const double V = src.gain, phi = src.seed_flux;
    pr.mean_i1 = e1 * q1 * V * phi;
    pr.mean_i2 = e2 * q2 * (1.0 + V) * phi;
    pr.auto1 = [=](double tau) { return e1 * q1sq * p1.correlation(p1, tau) * V * phi; };
    pr.auto2 = [=](double tau) {
      return e2 * q2sq * p2.correlation(p2, tau) * (1.0 + V) * phi;
    };
    pr.cross = [=](double tau) {
      return 2.0 * e1 * e2 * q1 * q2 * p1.correlation(p2, tau) * V * phi;
    };
    pr.integral_cross = 2.0 * e1 * e2 * q1 * q2 * V * phi;
  }
  return pr;
}

double predicted_relative_uncertainty(double eta, double flux, double tau_p, double T) {
  if (!(eta >= 0.0 && flux >= 0.0 && tau_p > 0.0))
    throw ConfigError("predicted_relative_uncertainty: nonnegative eta/flux, tau_p > 0");
  if (!(T > tau_p)) throw ConfigError("predicted_relative_uncertainty: T must exceed tau_p");
  const double n_taup = eta * flux * tau_p;
  return std::sqrt(n_taup) * std::sqrt(tau_p / T);
}

double SweepResult::extrapolate(double T) const {
  return std::pow(10.0, intercept + slope * std::log10(T));
}

namespace {

double pipeline_eta_q(const SweepConfig& cfg, double T, std::uint64_t seed) {
  SourceConfig src = cfg.source;
  src.duration = T;
  src.rng_seed = seed;

  std::vector<double> kept1, kept2;
  {
    const PairEventStream stream = generate(src);
    Rng ra = make_rng(seed, streams::thin_arm1);
    Rng rb = make_rng(seed, streams::thin_arm2);
    kept1 = thin(stream.arm1_times, cfg.detector1.eta, ra);
    kept2 = thin(stream.arm2_times, cfg.detector2.eta, rb);
  }
  Rng rd1 = make_rng(seed, streams::detector1);
  Rng rd2 = make_rng(seed, streams::detector2);
  DetectorModel d1 = cfg.detector1, d2 = cfg.detector2;
  d1.eta = 1.0;  // thinning already applied
  d2.eta = 1.0;
  const CurrentTrace t1 = synthesize_trace(kept1, d1, cfg.dt, T, rd1);
  const CurrentTrace t2 = synthesize_trace(kept2, d2, cfg.dt, T, rd2);

  const CorrelationRecord cross =
      covariance(t1, t2, cfg.tau_max, cfg.n_segments, cfg.threads);
  const double mean_i1 = t1.mean();
  if (cfg.source.mode == SourceMode::Spontaneous)
    return estimate_integrated_spdc(cross, mean_i1).eta_q;
  return estimate_integrated_stimulated(cross, mean_i1).eta_q;
}

}  // namespace

SweepResult run_uncertainty_sweep(const SweepConfig& cfg, std::span<const double> T_values,
                                  int repetitions,
                                  const std::function<std::uint64_t(int, int)>& seed_fn) {
  if (T_values.size() < 4) throw ConfigError("sweep: need at least 4 T values");
  if (repetitions < 30) throw ConfigError("sweep: need at least 30 repetitions");
  const auto [mn, mx] = std::minmax_element(T_values.begin(), T_values.end());
  if (!(*mn > 0.0) || *mx / *mn < 10.0 * (1.0 - 1e-9))
    throw ConfigError("sweep: T values must span at least one decade");

  const SourceConfig src = cfg.source.resolved();
  const double flux = src.mode == SourceMode::Spontaneous
                          ? src.mean_flux
                          : (1.0 + src.gain) * src.seed_flux;

  SweepResult result;
  std::vector<double> sorted(T_values.begin(), T_values.end());
  std::sort(sorted.begin(), sorted.end());
  for (int ti = 0; ti < static_cast<int>(sorted.size()); ++ti) {
    const double T = sorted[static_cast<std::size_t>(ti)];
    std::vector<double> estimates;
    estimates.reserve(static_cast<std::size_t>(repetitions));
    for (int rep = 0; rep < repetitions; ++rep) {
      const std::uint64_t seed =
          seed_fn ? seed_fn(ti, rep)
                  : substream_seed(cfg.source.rng_seed, streams::sweep,
                                   static_cast<std::uint64_t>(ti) * 100003u +
                                       static_cast<std::uint64_t>(rep));
      estimates.push_back(pipeline_eta_q(cfg, T, seed));
    }
    double mean = 0.0;
    for (const double e : estimates) mean += e;
    mean /= static_cast<double>(estimates.size());
    double var = 0.0;
    // bit-identical repetitions (same seed) must report exactly zero scatter,
    // not summation round-off
    const bool all_equal =
        std::all_of(estimates.begin(), estimates.end(),
                    [&](double e) { return e == estimates.front(); });
    if (!all_equal) {
      for (const double e : estimates) var += (e - mean) * (e - mean);
      var /= static_cast<double>(estimates.size() - 1);
    }

    SweepRow row;
    row.T = T;
    row.sigma_empirical = mean != 0.0 ? std::sqrt(var) / std::abs(mean) : 0.0;
    row.sigma_predicted =
        predicted_relative_uncertainty(cfg.detector2.eta, flux, cfg.detector2.pulse.width(), T);
    result.rows.push_back(row);
  }

  // least squares on log10 sigma vs log10 T
  bool all_positive = true;
  for (const auto& r : result.rows) all_positive = all_positive && r.sigma_empirical > 0.0;
  if (all_positive) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(result.rows.size());
    for (const auto& r : result.rows) {
      const double x = std::log10(r.T), y = std::log10(r.sigma_empirical);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    result.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    result.intercept = (sy - result.slope * sx) / n;
    result.fit_valid = true;
  }
  return result;
}

void write_sweep_csv(const std::string& path, const SweepResult& r) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.precision(17);
  os << "T,sigma_empirical,sigma_predicted\n";
  for (const auto& row : r.rows)
    os << row.T << ',' << row.sigma_empirical << ',' << row.sigma_predicted << '\n';
  nlohmann::json footer;
  footer["slope"] = r.slope;
  footer["intercept"] = r.intercept;
  footer["fit_valid"] = r.fit_valid;
  os << "# " << footer.dump() << '\n';
  if (!os) throw DataError("write failed: " + path);
}

}  // namespace tbcal
