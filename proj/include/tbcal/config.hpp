#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tbcal/calibrator.hpp"
#include "tbcal/frontend.hpp"
#include "tbcal/source.hpp"

namespace tbcal {

struct AcquisitionConfig {
  double dt = 0.0;
  double tau_max = 0.0;
  int n_segments = 16;
};

struct EstimatorSelection {
  EstimatorKind kind = EstimatorKind::IntegratedSPDC;
  double excess_noise = 1.0;  // M, ratio estimators
  double q1_mean = 1.0;       // ratio estimators
  double tau_eval = 0.0;
  double average_band = 0.0;
  std::optional<double> q2_mean;
};

/// Whole-run configuration; one JSON file drives simulate/calibrate/sweep.
/// All randomness flows from source.rng_seed; outputs embed the config hash.
struct RunConfig {
  SourceConfig source;
  DetectorModel detector1;
  DetectorModel detector2;
  AcquisitionConfig acquisition;
  std::vector<EstimatorSelection> estimators;
  bool unpumped_run = false;
  Systematics systematics;
  int threads = 1;

  /// Cross-field checks (dt vs tau_p, duration vs segments * tau_max);
  /// throws ConfigError with field-precise messages.
  void validate() const;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static RunConfig load(const std::string& path);

  /// FNV-1a over the canonical (key-sorted, defaults filled) serialization;
  /// key order of the input file does not affect it.
  std::uint64_t hash() const;
};

EstimatorKind estimator_kind_from_string(const std::string& s);
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t hash_file(const std::string& path);

}  // namespace tbcal
