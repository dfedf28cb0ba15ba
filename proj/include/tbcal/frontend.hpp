#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tbcal/pulse.hpp"
#include "tbcal/rng.hpp"

namespace tbcal {

enum class GainKind { Deterministic, Exponential, Gamma };

/// Charge produced per detection event, in abstract charge-units.
struct GainDistribution {
  GainKind kind = GainKind::Deterministic;
  double mean = 1.0;
  double shape = 1.0;  // Gamma only

  double second_moment() const;
  /// Excess noise factor M = <q^2>/<q>^2 (1, 2, 1 + 1/shape).
  double excess_noise() const;
  double sample(Rng& rng) const;
  void validate() const;
};

struct DetectorModel {
  std::string id = "det";
  double eta = 1.0;  // quantum efficiency
  PulseShape pulse{PulseKind::Rectangular, 1e-8};
  GainDistribution gain;
  double dark_rate = 0.0;         // internal events/s, same pulse/gain model
  double amplifier_noise = 0.0;   // white noise level, charge-units/s per sqrt(Hz)
  double background_flux = 0.0;   // uncorrelated photons/s before efficiency

  /// Throws ConfigError on out-of-range members; verifies the pulse area
  /// is unity to 1e-9 relative.
  void validate() const;
};

struct TraceMeta {
  std::string detector_id;
  std::string units = "charge-units/s";
  std::uint64_t config_hash = 0;
  std::uint64_t rng_seed = 0;
};

/// Uniformly sampled photocurrent record.
struct CurrentTrace {
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<double> samples;
  TraceMeta meta;

  double duration() const { return static_cast<double>(samples.size()) * dt; }
  double mean() const;
};

/// Beam-splitter model of non-ideal efficiency: each event is kept
/// independently with probability eta, order preserved.
std::vector<double> thin(std::span<const double> times, double eta, Rng& rng);

/// i(t) = sum_n q_n f(t - t_n), plus dark and background pulse trains and
/// white amplifier noise. Requires dt <= tau_p / 10.
CurrentTrace synthesize_trace(std::span<const double> times, const DetectorModel& det,
                              double dt, double duration, Rng& rng);

/// <i> = eta <q> F, photocurrent only.
double mean_current_prediction(const DetectorModel& det, double flux);

/// Variant including dark and background pedestals.
double mean_current_with_noise(const DetectorModel& det, double flux);

/// Binary trace file (magic "TBCAL"), little-endian f64 samples.
void write_trace(const std::string& path, const CurrentTrace& t);
CurrentTrace read_trace(const std::string& path);

/// CSV export/ingestion: "time,value" rows; dt inferred on read.
void write_trace_csv(const std::string& path, const CurrentTrace& t);
CurrentTrace read_trace_csv(const std::string& path);

}  // namespace tbcal
