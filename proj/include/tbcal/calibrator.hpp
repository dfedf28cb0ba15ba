#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tbcal/correlator.hpp"

namespace tbcal {

enum class Regime { I, II, III };

enum class EstimatorKind { RatioSPDC, IntegratedSPDC, RatioStimulated, IntegratedStimulated };

std::string to_string(Regime r);
std::string to_string(EstimatorKind k);

/// Conservative numerical stand-ins for the asymptotic "<<" conditions:
/// regime I below overlap = F tau_p, regime III above gain = V.
struct RegimeThresholds {
  double overlap = 0.1;
  double gain = 0.01;
};

Regime classify_regime(double flux, double tau_p, double V, RegimeThresholds th = {});

struct SystematicTerm {
  std::string name;
  double relative = 0.0;
};

/// Crystal/optical loss handling: the estimate is divided by
/// (1 - loss_correction) and loss_uncertainty enters the budget.
struct Systematics {
  double loss_correction = 0.0;
  double loss_uncertainty = 2e-3;
};

struct CalibrationReport {
  EstimatorKind estimator = EstimatorKind::IntegratedSPDC;
  double eta_q = 0.0;                     // eta2 <q2>, charge-units per photon
  std::optional<double> eta_q_averaged;   // lag-averaged ratio variant
  std::optional<double> eta;              // when <q2> is known and result in (0, 1]
  double stat_uncertainty = 0.0;          // relative
  std::vector<SystematicTerm> systematics;
  double total_uncertainty = 0.0;         // RSS of stat and systematic terms
  Regime regime = Regime::II;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

struct RatioOptions {
  double tau_eval = 0.0;
  /// When > 0, also report the ratio of lag sums over |tau| <= average_band.
  double average_band = 0.0;
  std::optional<double> q2_mean;
  Systematics systematics;
};

struct IntegratedOptions {
  std::optional<double> q2_mean;
  Systematics systematics;
};

/// eta2 <q2> = M <q1> cross(tau_eval) / auto1(tau_eval); auto1 must already
/// be background subtracted when noise sources are present.
CalibrationReport estimate_ratio_spdc(const CorrelationRecord& cross,
                                      const CorrelationRecord& auto1, double excess_noise_m,
                                      double q1_mean, const RatioOptions& opt = {});

/// eta2 <q2> = (integral of cross over tau) / <i1>; needs neither the gain
/// statistics nor the pulse shapes.
CalibrationReport estimate_integrated_spdc(const CorrelationRecord& cross, double mean_i1,
                                           const IntegratedOptions& opt = {});

/// Stimulated variants carry the extra 1/2 from the doubled cross covariance
/// of the seeded amplifier.
CalibrationReport estimate_ratio_stimulated(const CorrelationRecord& cross,
                                            const CorrelationRecord& auto1,
                                            double excess_noise_m, double q1_mean,
                                            const RatioOptions& opt = {});

CalibrationReport estimate_integrated_stimulated(const CorrelationRecord& cross,
                                                 double mean_i1,
                                                 const IntegratedOptions& opt = {});

/// Per-lag difference of a pumped and an unpumped (noise only)
/// autocorrelation, errors combined in quadrature.
CorrelationRecord subtract_background(const CorrelationRecord& pumped,
                                      const CorrelationRecord& unpumped);

}  // namespace tbcal
