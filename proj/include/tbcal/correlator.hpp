#pragma once

#include <string>
#include <vector>

#include "tbcal/frontend.hpp"

namespace tbcal {

/// Auto/cross covariance of current fluctuations versus lag, with per-lag
/// standard errors from the scatter of independent segment (block) estimates.
/// Cross records cover [-tau_max, tau_max]; auto records [0, tau_max].
struct CorrelationRecord {
  std::vector<double> lags;      // seconds
  std::vector<double> values;    // (charge-units/s)^2, mean over blocks
  std::vector<double> stderrs;   // standard error of the block mean
  std::vector<double> block_integrals;  // per-block trapezoid over the lags
  double dt = 0.0;
  int n_segments = 0;
  double mean_a = 0.0;  // global trace means used for reporting
  double mean_b = 0.0;
  bool auto_mode = false;
};

struct IntegralResult {
  double value = 0.0;
  double stderr_ = 0.0;
  /// False when the correlation has not decayed below 2 stderr at the
  /// window edge (warning-level; the value is still returned).
  bool window_decayed = true;
};

/// Splits the traces into n_segments equal blocks; each block is mean
/// centered and contributes a biased (1/N) covariance estimate per lag.
/// Reported values are the block means, errors the block-scatter standard
/// errors. Block results are combined in index order, so the output is
/// independent of the thread count.
CorrelationRecord covariance(const CurrentTrace& a, const CurrentTrace& b, double tau_max,
                             int n_segments, int threads = 1);

/// Same-trace shortcut producing a nonnegative-lag record.
CorrelationRecord auto_covariance(const CurrentTrace& a, double tau_max, int n_segments,
                                  int threads = 1);

/// Trapezoidal lag integral with its standard error (block scatter when
/// available, otherwise per-lag propagation).
IntegralResult integrate(const CorrelationRecord& record);

/// Per-lag difference with standard errors combined in quadrature; for
/// noise-background subtraction of autocorrelation records.
CorrelationRecord subtract_records(const CorrelationRecord& a, const CorrelationRecord& b);

/// CSV "lag_seconds,value,stderr" rows.
void write_record_csv(const std::string& path, const CorrelationRecord& r);

/// JSON sidecar: means, n_segments, dt, provenance hashes.
void write_record_sidecar(const std::string& path, const CorrelationRecord& r,
                          const std::string& provenance_json);

}  // namespace tbcal
