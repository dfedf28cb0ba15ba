#include "tbcal/calibrator.hpp"

#include <cmath>

#include "tbcal/errors.hpp"

namespace tbcal {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::I: return "I";
    case Regime::II: return "II";
    case Regime::III: return "III";
  }
  return "?";
}

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::RatioSPDC: return "ratio_spdc";
    case EstimatorKind::IntegratedSPDC: return "integrated_spdc";
    case EstimatorKind::RatioStimulated: return "ratio_stimulated";
    case EstimatorKind::IntegratedStimulated: return "integrated_stimulated";
  }
  return "?";
}

Regime classify_regime(double flux, double tau_p, double V, RegimeThresholds th) {
  if (V >= th.gain) return Regime::III;
  // inclusive boundary: F tau_p = 0.1 still counts as non-overlapping
  if (flux * tau_p <= th.overlap * (1.0 + 1e-12)) return Regime::I;
  return Regime::II;
}

nlohmann::json CalibrationReport::to_json() const {
  nlohmann::json j;
  j["estimator"] = to_string(estimator);
  j["eta_q"] = eta_q;
  if (eta_q_averaged) j["eta_q_lag_averaged"] = *eta_q_averaged;
  if (eta) j["eta"] = *eta;
  j["stat_uncertainty"] = stat_uncertainty;
  j["systematic_terms"] = nlohmann::json::array();
  for (const auto& s : systematics)
    j["systematic_terms"].push_back({{"name", s.name}, {"relative", s.relative}});
  j["total_uncertainty"] = total_uncertainty;
  j["regime"] = to_string(regime);
  j["notes"] = notes;
  return j;
}

namespace {

std::size_t lag_index(const CorrelationRecord& rec, double tau) {
  double best = std::abs(rec.lags.front() - tau);
  std::size_t idx = 0;
  for (std::size_t i = 1; i < rec.lags.size(); ++i) {
    const double d = std::abs(rec.lags[i] - tau);
    if (d < best) {
      best = d;
      idx = i;
    }
  }
  if (best > 0.5 * rec.dt * (1.0 + 1e-9))
    throw DataError("tau_eval outside the covered lag range");
  return idx;
}

void finalize(CalibrationReport& rep, const Systematics& sys,
              const std::optional<double>& q2_mean) {
  if (sys.loss_correction != 0.0) {
    rep.eta_q /= (1.0 - sys.loss_correction);
    if (rep.eta_q_averaged) *rep.eta_q_averaged /= (1.0 - sys.loss_correction);
  }
  rep.systematics.push_back({"crystal_optical_loss", sys.loss_uncertainty});
  double total2 = rep.stat_uncertainty * rep.stat_uncertainty;
  for (const auto& s : rep.systematics) total2 += s.relative * s.relative;
  rep.total_uncertainty = std::sqrt(total2);
  if (q2_mean) {
    const double e = rep.eta_q / *q2_mean;
    if (e > 0.0 && e <= 1.0)
      rep.eta = e;
    else
      rep.notes.push_back("eta omitted: eta_q / q2_mean outside (0, 1]");
  }
}

CalibrationReport ratio_estimate(const CorrelationRecord& cross,
                                 const CorrelationRecord& auto1, double excess_noise_m,
                                 double q1_mean, const RatioOptions& opt, double prefactor,
                                 EstimatorKind kind) {
  if (!(excess_noise_m >= 1.0)) throw ConfigError("excess noise M must be >= 1");
  if (!(q1_mean > 0.0)) throw ConfigError("q1_mean must be > 0");
  if (auto1.lags.size() < 2 || cross.lags.size() < 2)
    throw DataError("ratio estimator: records too short");

  const std::size_t ci = lag_index(cross, opt.tau_eval);
  const std::size_t ai = lag_index(auto1, std::abs(opt.tau_eval));
  const double c = cross.values[ci];
  const double a = auto1.values[ai];
  if (std::abs(a) <= 2.0 * auto1.stderrs[ai] || a <= 0.0)
    throw DegenerateDenominator("autocorrelation at tau_eval consistent with zero");

  CalibrationReport rep;
  rep.estimator = kind;
  rep.eta_q = prefactor * excess_noise_m * q1_mean * c / a;
  const double rel_c = c != 0.0 ? cross.stderrs[ci] / std::abs(c) : 0.0;
  const double rel_a = auto1.stderrs[ai] / a;
  rep.stat_uncertainty = std::hypot(rel_c, rel_a);

  if (opt.average_band > 0.0) {
    // ratio of lag sums over |tau| <= band; auto lags mirror onto tau < 0
    double cs = 0.0, as = 0.0;
    for (std::size_t i = 0; i < cross.lags.size(); ++i)
      if (std::abs(cross.lags[i]) <= opt.average_band * (1.0 + 1e-9)) {
        cs += cross.values[i];
        const std::size_t j = lag_index(auto1, std::abs(cross.lags[i]));
        as += auto1.values[j];
      }
    if (as > 0.0) rep.eta_q_averaged = prefactor * excess_noise_m * q1_mean * cs / as;
  }
  finalize(rep, opt.systematics, opt.q2_mean);
  return rep;
}

CalibrationReport integrated_estimate(const CorrelationRecord& cross, double mean_i1,
                                      const IntegratedOptions& opt, double prefactor,
                                      EstimatorKind kind) {
  const IntegralResult integral = integrate(cross);
  if (!(mean_i1 > 0.0))
    throw DegenerateDenominator("mean current <i1> must be > 0");

  CalibrationReport rep;
  rep.estimator = kind;
  rep.eta_q = prefactor * integral.value / mean_i1;
  rep.stat_uncertainty =
      integral.value != 0.0 ? std::abs(integral.stderr_ / integral.value) : 0.0;
  if (!integral.window_decayed)
    rep.notes.push_back("warning: cross covariance not decayed at the window edge");
  finalize(rep, opt.systematics, opt.q2_mean);
  return rep;
}

}  // namespace

CalibrationReport estimate_ratio_spdc(const CorrelationRecord& cross,
                                      const CorrelationRecord& auto1, double excess_noise_m,
                                      double q1_mean, const RatioOptions& opt) {
  return ratio_estimate(cross, auto1, excess_noise_m, q1_mean, opt, 1.0,
                        EstimatorKind::RatioSPDC);
}

CalibrationReport estimate_integrated_spdc(const CorrelationRecord& cross, double mean_i1,
                                           const IntegratedOptions& opt) {
  return integrated_estimate(cross, mean_i1, opt, 1.0, EstimatorKind::IntegratedSPDC);
}

CalibrationReport estimate_ratio_stimulated(const CorrelationRecord& cross,
                                            const CorrelationRecord& auto1,
                                            double excess_noise_m, double q1_mean,
                                            const RatioOptions& opt) {
  return ratio_estimate(cross, auto1, excess_noise_m, q1_mean, opt, 0.5,
                        EstimatorKind::RatioStimulated);
}

CalibrationReport estimate_integrated_stimulated(const CorrelationRecord& cross,
                                                 double mean_i1,
                                                 const IntegratedOptions& opt) {
  return integrated_estimate(cross, mean_i1, opt, 0.5,
                             EstimatorKind::IntegratedStimulated);
}

CorrelationRecord subtract_background(const CorrelationRecord& pumped,
                                      const CorrelationRecord& unpumped) {
  return subtract_records(pumped, unpumped);
}

}  // namespace tbcal
