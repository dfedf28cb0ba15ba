#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "tbcal/errors.hpp"
#include "tbcal/frontend.hpp"
#include "tbcal/rng.hpp"

using namespace tbcal;

namespace {

DetectorModel basic_detector(PulseKind kind = PulseKind::Rectangular, double tau_p = 1e-8) {
  DetectorModel d;
  d.eta = 1.0;
  d.pulse = PulseShape(kind, tau_p);
  return d;
}

}  // namespace

TEST_CASE("thinning keeps the binomial fraction") {
  std::vector<double> times(1000000);
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = static_cast<double>(i) * 1e-8;

  Rng rng = make_rng(1, streams::thin_arm1);
  const auto all = thin(times, 1.0, rng);
  CHECK(all == times);

  Rng rng0 = make_rng(1, streams::thin_arm1);
  CHECK(thin(times, 0.0, rng0).empty());

  Rng rng6 = make_rng(1, streams::thin_arm1);
  const auto kept = thin(times, 0.6, rng6);
  const double frac = static_cast<double>(kept.size()) / static_cast<double>(times.size());
  CHECK(std::abs(frac - 0.6) <= 5.0 * std::sqrt(0.6 * 0.4 / 1e6));
  // order preserved
  for (std::size_t i = 1; i < kept.size(); ++i) CHECK(kept[i] > kept[i - 1]);

  Rng bad = make_rng(1, streams::thin_arm1);
  CHECK_THROWS_AS(thin(times, 1.5, bad), ConfigError);
}

TEST_CASE("empty event list with no noise gives an all-zero trace") {
  Rng rng = make_rng(0, streams::detector1);
  const auto t = synthesize_trace({}, basic_detector(), 1e-9, 1e-5, rng);
  CHECK(t.samples.size() == 10000);
  for (const double v : t.samples) CHECK(v == 0.0);
}

TEST_CASE("single pulse integrates to its charge for every shape") {
  for (const PulseKind k :
       {PulseKind::Rectangular, PulseKind::OneSidedExponential, PulseKind::Gaussian}) {
    Rng rng = make_rng(0, streams::detector1);
    const std::vector<double> times = {5e-6};
    const auto t = synthesize_trace(times, basic_detector(k, 1e-7), 1e-9, 1e-5, rng);
    double sum = 0.0;
    for (const double v : t.samples) sum += v;
    sum *= t.dt;
    // grid Riemann sum of a unit-area pulse: exact for the aligned rectangle,
    // first-order (0.5 dt/tau_p) for the one-sided exponential's jump at 0,
    // second-order for the smooth Gaussian. Events at random offsets average
    // this out, so only the single-pulse bound is this loose.
    CHECK(std::abs(sum - 1.0) <= 0.6 * t.dt / 1e-7);
  }
}

TEST_CASE("rectangular pulse on an aligned grid is exact") {
  Rng rng = make_rng(0, streams::detector1);
  const std::vector<double> times = {5e-6};  // multiple of dt
  const auto t = synthesize_trace(times, basic_detector(PulseKind::Rectangular, 1e-7), 1e-9,
                                  1e-5, rng);
  double sum = 0.0;
  for (const double v : t.samples) sum += v;
  CHECK(std::abs(sum * t.dt - 1.0) <= 1e-9);
}

TEST_CASE("synthesis is linear in the event set") {
  std::vector<double> a = {1e-6, 2e-6, 5e-6}, b = {1.5e-6, 7e-6}, both = a;
  both.insert(both.end(), b.begin(), b.end());
  std::sort(both.begin(), both.end());
  const DetectorModel det = basic_detector(PulseKind::OneSidedExponential, 1e-7);
  Rng r1 = make_rng(0, streams::detector1), r2 = make_rng(0, streams::detector1),
      r3 = make_rng(0, streams::detector1);
  const auto ta = synthesize_trace(a, det, 1e-9, 1e-5, r1);
  const auto tb = synthesize_trace(b, det, 1e-9, 1e-5, r2);
  const auto tc = synthesize_trace(both, det, 1e-9, 1e-5, r3);
  for (std::size_t i = 0; i < tc.samples.size(); ++i) {
    const double want = ta.samples[i] + tb.samples[i];
    CHECK(std::abs(tc.samples[i] - want) <=
          1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("trace mean approaches eta <q> F") {
  // F = 1e9/s over 1 ms; exponential gain with mean 2 -> <i> = 1.2e9
  const double F = 1e9, T = 1e-3;
  Rng ev = make_rng(3, streams::source);
  std::poisson_distribution<long long> count(F * T);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> times(static_cast<std::size_t>(count(ev)));
  for (double& t : times) t = u01(ev) * T;
  std::sort(times.begin(), times.end());

  DetectorModel det = basic_detector(PulseKind::Rectangular, 1e-8);
  det.eta = 0.6;
  det.gain.kind = GainKind::Exponential;
  det.gain.mean = 2.0;

  Rng rng = make_rng(3, streams::detector1);
  const auto kept = thin(times, det.eta, rng);
  DetectorModel unit = det;
  unit.eta = 1.0;
  const auto t = synthesize_trace(kept, unit, 1e-9, T, rng);
  const double want = mean_current_prediction(det, F);
  CHECK(want == doctest::Approx(1.2e9).epsilon(1e-12));
  // shot-noise se of the time average: sqrt(eta F T <q^2>/<q>^2 ...) ~ via counts
  const double se = want / std::sqrt(det.eta * F * T) * std::sqrt(2.0);
  CHECK(std::abs(t.mean() - want) <= 5.0 * se);
}

TEST_CASE("mean current prediction closed forms") {
  DetectorModel d = basic_detector();
  d.eta = 0.5;
  CHECK(mean_current_prediction(d, 1e8) == doctest::Approx(5e7).epsilon(1e-12));
  CHECK(mean_current_prediction(d, 0.0) == 0.0);
  d.dark_rate = 1e6;
  d.background_flux = 1e7;
  CHECK(mean_current_with_noise(d, 1e8) ==
        doctest::Approx(5e7 + 1e6 + 0.5 * 1e7).epsilon(1e-12));
  CHECK_THROWS_AS(mean_current_prediction(d, -1.0), ConfigError);
}

TEST_CASE("gain sampler moments match the closed-form M") {
  struct Case {
    GainKind kind;
    double mean, shape, M;
  };
  const Case cases[] = {{GainKind::Deterministic, 1.5, 1.0, 1.0},
                        {GainKind::Exponential, 2.0, 1.0, 2.0},
                        {GainKind::Gamma, 1.0, 4.0, 1.25}};
  for (const auto& c : cases) {
    GainDistribution g{c.kind, c.mean, c.shape};
    CHECK(g.excess_noise() == doctest::Approx(c.M).epsilon(1e-12));
    Rng rng = make_rng(17, streams::detector2);
    const std::size_t n = 1000000;
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = g.sample(rng);
      s1 += q;
      s2 += q * q;
      s4 += q * q * q * q;
    }
    s1 /= static_cast<double>(n);
    s2 /= static_cast<double>(n);
    s4 /= static_cast<double>(n);
    CHECK(std::abs(s1 - c.mean) <= 5.0 * std::sqrt(std::max(s2 - s1 * s1, 0.0) / n) + 1e-12);
    const double m_emp = s2 / (s1 * s1);
    const double se_m = std::sqrt(std::max(s4 - s2 * s2, 0.0) / n) / (s1 * s1);
    CHECK(std::abs(m_emp - c.M) <= 5.0 * se_m + 1e-12);
  }
}

TEST_CASE("overlap regimes behave as expected") {
  // F tau_p << 1: peak ~ single-pulse height; F tau_p >> 1: mean >> height
  const double tau_p = 1e-8;
  const DetectorModel det = basic_detector(PulseKind::Rectangular, tau_p);
  const double height = 1.0 / tau_p;
  Rng ev = make_rng(9, streams::source);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto make_times = [&](double F, double T) {
    std::poisson_distribution<long long> count(F * T);
    std::vector<double> times(static_cast<std::size_t>(count(ev)));
    for (double& t : times) t = u01(ev) * T;
    std::sort(times.begin(), times.end());
    return times;
  };
  Rng r1 = make_rng(9, streams::detector1);
  const auto sparse = synthesize_trace(make_times(1e5, 1e-3), det, 1e-9, 1e-3, r1);
  double peak = 0.0;
  for (const double v : sparse.samples) peak = std::max(peak, v);
  CHECK(peak <= 3.0 * height);  // rare overlaps only
  CHECK(sparse.mean() < 0.1 * height);

  Rng r2 = make_rng(9, streams::detector1);
  const auto densez = synthesize_trace(make_times(1e9, 1e-4), det, 1e-9, 1e-4, r2);
  CHECK(densez.mean() > 5.0 * height);
}

TEST_CASE("synthesis validates its inputs") {
  Rng rng = make_rng(0, streams::detector1);
  const DetectorModel det = basic_detector(PulseKind::Rectangular, 1e-8);
  CHECK_THROWS_AS(synthesize_trace({}, det, 1e-8, 1e-5, rng), ConfigError);  // dt too coarse
  CHECK_THROWS_AS(synthesize_trace({}, det, 1e-9, 0.0, rng), ConfigError);
  DetectorModel bad = det;
  bad.eta = 1.5;
  CHECK_THROWS_AS(synthesize_trace({}, bad, 1e-9, 1e-5, rng), ConfigError);
  DetectorModel badgain = det;
  badgain.gain.mean = 0.0;
  CHECK_THROWS_AS(synthesize_trace({}, badgain, 1e-9, 1e-5, rng), ConfigError);
}

TEST_CASE("amplifier noise has the configured per-sample RMS") {
  DetectorModel det = basic_detector();
  det.amplifier_noise = 2.0;  // charge-units/s/sqrt(Hz)
  const double dt = 1e-9;
  Rng rng = make_rng(4, streams::detector1);
  const auto t = synthesize_trace({}, det, dt, 1e-4, rng);
  double s2 = 0.0;
  for (const double v : t.samples) s2 += v * v;
  s2 /= static_cast<double>(t.samples.size());
  const double want = det.amplifier_noise * det.amplifier_noise / dt;
  CHECK(std::abs(s2 - want) <=
        5.0 * want * std::sqrt(2.0 / static_cast<double>(t.samples.size())));
}

TEST_CASE("binary trace round trip is bit exact") {
  Rng rng = make_rng(5, streams::detector2);
  DetectorModel det = basic_detector(PulseKind::Gaussian, 1e-7);
  det.amplifier_noise = 1.0;
  det.id = "d2";
  auto t = synthesize_trace({{3e-6}}, det, 1e-9, 1e-5, rng);
  t.meta.config_hash = 0xdeadbeefcafef00dull;
  t.meta.rng_seed = 5;
  const std::string path = "test_trace.tbcal";
  write_trace(path, t);
  const auto r = read_trace(path);
  CHECK(r.samples == t.samples);
  CHECK(r.dt == t.dt);
  CHECK(r.t0 == t.t0);
  CHECK(r.meta.detector_id == t.meta.detector_id);
  CHECK(r.meta.units == t.meta.units);
  CHECK(r.meta.config_hash == t.meta.config_hash);
  CHECK(r.meta.rng_seed == t.meta.rng_seed);
  std::remove(path.c_str());
}

TEST_CASE("trace CSV export can be re-ingested") {
  Rng rng = make_rng(6, streams::detector1);
  const auto t = synthesize_trace({{1e-6, 4e-6}}, basic_detector(), 1e-9, 1e-5, rng);
  const std::string path = "test_trace.csv";
  write_trace_csv(path, t);
  const auto r = read_trace_csv(path);
  REQUIRE(r.samples.size() == t.samples.size());
  CHECK(std::abs(r.dt - t.dt) <= 1e-15);
  for (std::size_t i = 0; i < r.samples.size(); ++i)
    CHECK(r.samples[i] == doctest::Approx(t.samples[i]).epsilon(1e-15));
  std::remove(path.c_str());
}

TEST_CASE("malformed trace files raise DataError") {
  CHECK_THROWS_AS(read_trace("no_such_trace.tbcal"), DataError);
  const std::string path = "test_bad_trace.tbcal";
  {
    FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("NOTTBCAL", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_trace(path), DataError);
  std::remove(path.c_str());

  // non-uniform CSV
  const std::string csv = "test_bad_trace.csv";
  {
    FILE* f = std::fopen(csv.c_str(), "w");
    std::fputs("time,value\n0,1\n1e-9,1\n3e-9,1\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_trace_csv(csv), DataError);
  std::remove(csv.c_str());
}
