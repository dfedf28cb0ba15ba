#include <doctest.h>

#include <cmath>
#include <vector>

#include "tbcal/calibrator.hpp"
#include "tbcal/correlator.hpp"
#include "tbcal/errors.hpp"
#include "tbcal/frontend.hpp"
#include "tbcal/rng.hpp"
#include "tbcal/source.hpp"

using namespace tbcal;

namespace {

// cross = amp * F(tau), auto1 = amp / ratio_value * F(tau): the ratio
// estimator must return ratio_value exactly.
CorrelationRecord shaped_record(double amp, const PulseShape& p, double dt, int n_half,
                                double rel_err = 1e-4) {
  CorrelationRecord rec;
  rec.dt = dt;
  rec.n_segments = 0;
  for (int k = -n_half; k <= n_half; ++k) {
    const double tau = k * dt;
    rec.lags.push_back(tau);
    rec.values.push_back(amp * p.correlation(p, tau));
    rec.stderrs.push_back(rel_err * amp * p.correlation(p, 0.0));
  }
  return rec;
}

struct PipelineOut {
  CorrelationRecord cross;
  CorrelationRecord auto1;
  double mean_i1 = 0.0;
};

PipelineOut run_pipeline(double V, double F, double eta1, double eta2, double T,
                         std::uint64_t seed, const DetectorModel& base1,
                         const DetectorModel& base2) {
  SourceConfig src;
  src.mode = SourceMode::Spontaneous;
  src.gain = V;
  src.mean_flux = F;
  src.duration = T;
  src.rng_seed = seed;
  const auto stream = generate(src);
  Rng ra = make_rng(seed, streams::thin_arm1), rb = make_rng(seed, streams::thin_arm2);
  const auto k1 = thin(stream.arm1_times, eta1, ra);
  const auto k2 = thin(stream.arm2_times, eta2, rb);
  Rng r1 = make_rng(seed, streams::detector1), r2 = make_rng(seed, streams::detector2);
  const auto t1 = synthesize_trace(k1, base1, 1e-9, T, r1);
  const auto t2 = synthesize_trace(k2, base2, 1e-9, T, r2);
  PipelineOut out;
  out.cross = covariance(t1, t2, 5e-8, 8);
  out.auto1 = auto_covariance(t1, 5e-8, 8);
  out.mean_i1 = t1.mean();
  return out;
}

DetectorModel rect_detector() {
  DetectorModel d;
  d.pulse = PulseShape(PulseKind::Rectangular, 1e-8);
  return d;
}

}  // namespace

TEST_CASE("regime classification") {
  CHECK(classify_regime(1e7, 1e-8, 1e-4) == Regime::I);
  CHECK(classify_regime(1e10, 1e-8, 1e-3) == Regime::II);
  CHECK(classify_regime(1e6, 1e-8, 0.5) == Regime::III);
  // configurable thresholds
  RegimeThresholds th;
  th.overlap = 10.0;
  CHECK(classify_regime(1e8, 1e-8, 1e-4, th) == Regime::I);
}

TEST_CASE("ratio estimator is exact on constructed records") {
  const PulseShape p(PulseKind::Rectangular, 1e-8);
  const auto cross = shaped_record(0.36, p, 1e-10, 200);
  const auto auto1 = shaped_record(0.6, p, 1e-10, 200);
  const auto rep = estimate_ratio_spdc(cross, auto1, 1.0, 1.0);
  CHECK(rep.eta_q == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(rep.estimator == EstimatorKind::RatioSPDC);
  CHECK(rep.stat_uncertainty > 0.0);
  // averaged variant over |tau| <= tau_p gives the same constant ratio
  RatioOptions opt;
  opt.average_band = 1e-8;
  const auto rep2 = estimate_ratio_spdc(cross, auto1, 1.0, 1.0, opt);
  REQUIRE(rep2.eta_q_averaged.has_value());
  CHECK(*rep2.eta_q_averaged == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("stimulated ratio carries the 1/2 prefactor") {
  const PulseShape p(PulseKind::Rectangular, 1e-8);
  const double v_phi = 1e7;
  const auto cross = shaped_record(2.0 * 0.36 * v_phi, p, 1e-10, 200);
  const auto auto1 = shaped_record(0.6 * v_phi, p, 1e-10, 200);
  const auto rep = estimate_ratio_stimulated(cross, auto1, 1.0, 1.0);
  CHECK(rep.eta_q == doctest::Approx(0.6).epsilon(1e-12));
  // omitting the 1/2 (using the spontaneous form) doubles the estimate
  const auto wrong = estimate_ratio_spdc(cross, auto1, 1.0, 1.0);
  CHECK(wrong.eta_q == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("integrated estimators on constructed records") {
  const PulseShape p(PulseKind::Rectangular, 1e-8);
  const double amp = 1.8e8;  // = eta1 eta2 F with eta1 = 0.5, eta2 = 0.6, F = 6e8
  const auto cross = shaped_record(amp, p, 1e-10, 200, 0.0);
  const double mean_i1 = 3e8;  // eta1 F
  const auto rep = estimate_integrated_spdc(cross, mean_i1);
  CHECK(rep.eta_q == doctest::Approx(0.6).epsilon(1e-3));  // trapezoid discretization
  const auto rep2 = estimate_integrated_stimulated(cross, mean_i1);
  CHECK(rep2.eta_q == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("integrated estimator is exactly scale invariant") {
  const PulseShape p(PulseKind::Rectangular, 1e-8);
  auto cross = shaped_record(0.36e8, p, 1e-10, 200, 0.0);
  const double mean_i1 = 2e8;
  const double base = estimate_integrated_spdc(cross, mean_i1).eta_q;
  // common gain g on both traces scales cross by g^2 and <i1> by g
  const double g = 4.0;
  for (double& v : cross.values) v *= g * g;
  for (double& e : cross.stderrs) e *= g * g;
  const double scaled = estimate_integrated_spdc(cross, g * mean_i1).eta_q;
  CHECK(scaled == g * base);  // bit-exact: g is a power of two
}

TEST_CASE("degenerate denominators raise") {
  const PulseShape p(PulseKind::Rectangular, 1e-8);
  const auto cross = shaped_record(0.36, p, 1e-10, 200);
  auto auto1 = shaped_record(0.6, p, 1e-10, 200);
  // kill the denominator: values consistent with zero at tau = 0
  for (double& v : auto1.values) v = 0.0;
  for (double& e : auto1.stderrs) e = 1.0;
  CHECK_THROWS_AS(estimate_ratio_spdc(cross, auto1, 1.0, 1.0), DegenerateDenominator);
  CHECK_THROWS_AS(estimate_integrated_spdc(cross, 0.0), DegenerateDenominator);
  CHECK_THROWS_AS(estimate_integrated_spdc(cross, -1.0), DegenerateDenominator);
  CHECK_THROWS_AS(estimate_ratio_spdc(cross, auto1, 0.5, 1.0), ConfigError);  // M < 1
}

TEST_CASE("systematics: loss correction and uncertainty budget") {
  const PulseShape p(PulseKind::Rectangular, 1e-8);
  const auto cross = shaped_record(0.36, p, 1e-10, 200);
  const auto auto1 = shaped_record(0.6, p, 1e-10, 200);
  RatioOptions opt;
  opt.systematics.loss_correction = 0.01;
  opt.systematics.loss_uncertainty = 2e-3;
  opt.q2_mean = 1.0;
  const auto rep = estimate_ratio_spdc(cross, auto1, 1.0, 1.0, opt);
  CHECK(rep.eta_q == doctest::Approx(0.6 / 0.99).epsilon(1e-12));
  REQUIRE(rep.eta.has_value());
  CHECK(*rep.eta == doctest::Approx(0.6 / 0.99).epsilon(1e-12));
  const double want_total =
      std::sqrt(rep.stat_uncertainty * rep.stat_uncertainty + 2e-3 * 2e-3);
  CHECK(rep.total_uncertainty == doctest::Approx(want_total).epsilon(1e-12));
  // eta > 1 is withheld with a note
  RatioOptions opt2;
  opt2.q2_mean = 0.1;
  const auto rep2 = estimate_ratio_spdc(cross, auto1, 1.0, 1.0, opt2);
  CHECK_FALSE(rep2.eta.has_value());
  CHECK_FALSE(rep2.notes.empty());
}

TEST_CASE("report serializes to JSON") {
  const PulseShape p(PulseKind::Rectangular, 1e-8);
  const auto cross = shaped_record(0.36, p, 1e-10, 200);
  const auto auto1 = shaped_record(0.6, p, 1e-10, 200);
  const auto rep = estimate_ratio_spdc(cross, auto1, 1.0, 1.0);
  const auto j = rep.to_json();
  CHECK(j["estimator"] == "ratio_spdc");
  CHECK(j["eta_q"].get<double>() == doctest::Approx(0.6));
  CHECK(j.contains("total_uncertainty"));
  CHECK(j.contains("regime"));
}

TEST_CASE("ratio and integrated estimators agree on the same data") {
  const auto out = run_pipeline(1e-3, 5e8, 0.4, 0.6, 2e-3, 41, rect_detector(), rect_detector());
  const auto ratio = estimate_ratio_spdc(out.cross, out.auto1, 1.0, 1.0);
  const auto integ = estimate_integrated_spdc(out.cross, out.mean_i1);
  const double sigma = std::hypot(ratio.stat_uncertainty * ratio.eta_q,
                                  integ.stat_uncertainty * integ.eta_q);
  CHECK(std::abs(ratio.eta_q - integ.eta_q) <= 3.0 * sigma);
  CHECK(std::abs(integ.eta_q - 0.6) <= 3.0 * sigma);
}

TEST_CASE("estimates increase monotonically with true eta2") {
  double prev = -1.0, prev_sigma = 0.0;
  for (const double eta2 : {0.2, 0.4, 0.6, 0.8}) {
    const auto out =
        run_pipeline(1e-3, 5e8, 0.4, eta2, 4e-3, 53, rect_detector(), rect_detector());
    const auto rep = estimate_integrated_spdc(out.cross, out.mean_i1);
    const double sigma = rep.stat_uncertainty * rep.eta_q;
    if (prev >= 0.0) CHECK(rep.eta_q - prev > 3.0 * std::hypot(sigma, prev_sigma));
    prev = rep.eta_q;
    prev_sigma = sigma;
  }
}

TEST_CASE("noise inflates the autocorrelation but not the cross correlation") {
  // dark events comparable to the detected flux, so the autocorrelation
  // pedestal is clearly inflated while the cross correlation is untouched
  DetectorModel noisy = rect_detector();
  noisy.dark_rate = 5e8;
  noisy.amplifier_noise = 100.0;
  const auto clean =
      run_pipeline(1e-3, 5e8, 0.4, 0.6, 2e-3, 67, rect_detector(), rect_detector());
  const auto dirty = run_pipeline(1e-3, 5e8, 0.4, 0.6, 2e-3, 67, noisy, noisy);
  const auto ic = integrate(clean.cross);
  const auto id = integrate(dirty.cross);
  CHECK(std::abs(ic.value - id.value) <= 5.0 * std::hypot(ic.stderr_, id.stderr_));
  CHECK(dirty.auto1.values.front() > 2.0 * clean.auto1.values.front());
}

TEST_CASE("background subtraction restores the ratio denominator") {
  DetectorModel noisy = rect_detector();
  noisy.dark_rate = 5e7;
  const auto dirty =
      run_pipeline(1e-3, 5e8, 0.4, 0.6, 4e-3, 71, noisy, rect_detector());
  // unpumped run: identical noise model, no SPDC photons
  Rng ru = make_rng(71, streams::unpumped1);
  const auto u1 = synthesize_trace({}, noisy, 1e-9, 4e-3, ru);
  const auto noise_rec = auto_covariance(u1, 5e-8, 8);

  const auto biased = estimate_ratio_spdc(dirty.cross, dirty.auto1, 1.0, 1.0);
  const auto fixed_auto = subtract_background(dirty.auto1, noise_rec);
  const auto fixed = estimate_ratio_spdc(dirty.cross, fixed_auto, 1.0, 1.0);
  // dark pulses inflate auto1 -> biased low; subtraction recovers
  CHECK(biased.eta_q < 0.6 * 0.9);
  CHECK(std::abs(fixed.eta_q - 0.6) <= 3.0 * fixed.stat_uncertainty * fixed.eta_q);
}

TEST_CASE("subtract_background trivial cases") {
  const PulseShape p(PulseKind::Rectangular, 1e-8);
  const auto pumped = shaped_record(0.5, p, 1e-10, 100);
  auto zero = pumped;
  for (double& v : zero.values) v = 0.0;
  for (double& e : zero.stderrs) e = 0.0;
  const auto same = subtract_background(pumped, zero);
  CHECK(same.values == pumped.values);
  const auto nil = subtract_background(pumped, pumped);
  for (const double v : nil.values) CHECK(v == 0.0);
}
