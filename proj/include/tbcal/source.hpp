#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace tbcal {

enum class SourceMode { Spontaneous, Stimulated };

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

inline bool is_set(double v) { return v == v; }

/// Twin-beam source parameters. For the spontaneous mode the triple
/// (mean_flux F, gain V, coherence_time tau_coh) is tied by F = V / tau_coh
/// (one collected temporal mode per tau_coh slot); any one of the three may
/// be left unset and is derived from the other two. Supplying all three with
/// |F tau_coh - V| / V > 1e-6 is rejected.
struct SourceConfig {
  SourceMode mode = SourceMode::Spontaneous;
  double mean_flux = kUnset;       // F, photons/s per arm (spontaneous)
  double gain = kUnset;            // V, mean photons per mode
  double coherence_time = kUnset;  // tau_coh, s
  double seed_flux = 0.0;          // phi, photons/s (stimulated only)
  double duration = 0.0;           // T, s
  std::uint64_t rng_seed = 0;

  /// Returns a copy with the derived member filled in; throws ConfigError /
  /// RegimeUnsupported on invalid or out-of-regime parameters.
  SourceConfig resolved() const;
};

/// Timestamped photon events for the two arms. arm1_links[i] is the index
/// into arm2_times of the partner of arm1_times[i], or -1 when unpaired.
/// Both arms are sorted ascending, all times in [0, duration), and every
/// linked pair satisfies |t1 - t2| <= coherence_time.
struct PairEventStream {
  std::vector<double> arm1_times;
  std::vector<double> arm2_times;
  std::vector<std::int32_t> arm1_links;
  double duration = 0.0;
  double coherence_time = 0.0;
  SourceMode mode = SourceMode::Spontaneous;
};

/// Thermal per-mode pair statistics: the pair count of each tau_coh slot is
/// Bose-Einstein distributed with mean V, both photons of a pair landing
/// uniformly inside the slot. Every arm1 event is linked.
PairEventStream generate_spontaneous(const SourceConfig& cfg);

/// Seeded amplifier: arm2 carries a Poisson seed train of rate phi; each
/// seed independently triggers (probability V) a stimulated pair adding one
/// photon to each arm within tau_coh of the trigger.
PairEventStream generate_stimulated(const SourceConfig& cfg);

/// Dispatch on cfg.mode.
PairEventStream generate(const SourceConfig& cfg);

/// Binary event file (magic "TBEVT"), little-endian f64 timestamps.
void write_events(const std::string& path, const PairEventStream& s);
PairEventStream read_events(const std::string& path);

}  // namespace tbcal
