#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tbcal/frontend.hpp"
#include "tbcal/source.hpp"

namespace tbcal {

/// Closed-form means and covariance functions for a source / detector pair,
/// the reference the simulated pipeline is checked against.
struct AnalyticPrediction {
  double mean_i1 = 0.0;
  double mean_i2 = 0.0;
  std::function<double(double)> auto1;
  std::function<double(double)> auto2;
  std::function<double(double)> cross;
  double integral_cross = 0.0;
  double bunching_term = 0.0;  // Im ~ V <F> (spontaneous only)
};

/// Spontaneous:
///   cross(tau) = eta1 eta2 <q1><q2> F12(tau) (<F> + Im)
///   autok(tau) = etak <qk^2> Fkk(tau) (<F> + etak Im),  Im = V <F>
/// Stimulated:
///   <i1> = eta1 <q1> V phi,  <i2> = eta2 <q2> (1+V) phi
///   auto1 = eta1 <q1^2> F11 V phi,  auto2 = eta2 <q2^2> F22 (1+V) phi
///   cross = 2 eta1 eta2 <q1><q2> F12 V phi
/// Noise pedestals (dark, background) are not part of the correlation
/// predictions; they are statistically independent of the twin beams.
AnalyticPrediction predict(const SourceConfig& source, const DetectorModel& d1,
                           const DetectorModel& d2);

/// sqrt(<N_tau_p>) * sqrt(tau_p / T) with <N_tau_p> = eta * flux * tau_p,
/// the detected photons per response time. An order-of-magnitude bound.
double predicted_relative_uncertainty(double eta, double flux, double tau_p, double T);

struct SweepConfig {
  SourceConfig source;  // duration is overridden per sweep point
  DetectorModel detector1;
  DetectorModel detector2;
  double dt = 0.0;
  double tau_max = 0.0;
  int n_segments = 8;
  int threads = 1;
};

struct SweepRow {
  double T = 0.0;
  double sigma_empirical = 0.0;
  double sigma_predicted = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double slope = 0.0;      // d log10 sigma / d log10 T
  double intercept = 0.0;  // log10 sigma at log10 T = 0
  bool fit_valid = false;

  /// sigma_empirical extrapolated from the fit to measurement time T.
  double extrapolate(double T) const;
};

/// Repeats the full pipeline (generate, thin, synthesize, correlate,
/// integrated estimator) with fresh per-repetition seeds for every T and
/// reports the relative scatter of the estimate against the prediction.
/// seed_fn(t_index, repetition) customizes seeding (the default derives
/// distinct substreams from source.rng_seed).
SweepResult run_uncertainty_sweep(
    const SweepConfig& cfg, std::span<const double> T_values, int repetitions,
    const std::function<std::uint64_t(int, int)>& seed_fn = {});

void write_sweep_csv(const std::string& path, const SweepResult& r);

}  // namespace tbcal
