#include "tbcal/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tbcal/errors.hpp"

namespace tbcal {

double GainDistribution::second_moment() const {
  switch (kind) {
    case GainKind::Deterministic: return mean * mean;
    case GainKind::Exponential: return 2.0 * mean * mean;
    case GainKind::Gamma: return mean * mean * (1.0 + 1.0 / shape);
  }
  return 0.0;
}

double GainDistribution::excess_noise() const { return second_moment() / (mean * mean); }

double GainDistribution::sample(Rng& rng) const {
  switch (kind) {
    case GainKind::Deterministic: return mean;
    case GainKind::Exponential: {
      std::exponential_distribution<double> d(1.0 / mean);
      return d(rng);
    }
    case GainKind::Gamma: {
      std::gamma_distribution<double> d(shape, mean / shape);
      return d(rng);
    }
  }
  return mean;
}

void GainDistribution::validate() const {
  if (!(mean > 0.0)) throw ConfigError("gain.mean must be > 0");
  if (kind == GainKind::Gamma && !(shape > 0.0)) throw ConfigError("gain.shape must be > 0");
}

void DetectorModel::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("detector.eta must be in [0, 1]");
  gain.validate();
  if (!(dark_rate >= 0.0)) throw ConfigError("detector.dark_rate must be >= 0");
  if (!(amplifier_noise >= 0.0)) throw ConfigError("detector.amplifier_noise must be >= 0");
  if (!(background_flux >= 0.0)) throw ConfigError("detector.background_flux must be >= 0");
  const double area = pulse.numeric_area();
  if (std::abs(area - 1.0) > 1e-9)
    throw ConfigError("detector.pulse: area deviates from unity beyond 1e-9");
}

double CurrentTrace::mean() const {
  if (samples.empty()) return 0.0;
  double s = 0.0;
  for (const double v : samples) s += v;
  return s / static_cast<double>(samples.size());
}

std::vector<double> thin(std::span<const double> times, double eta, Rng& rng) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("thin: eta must be in [0, 1]");
  std::vector<double> kept;
  if (eta == 0.0) return kept;
  kept.reserve(static_cast<std::size_t>(static_cast<double>(times.size()) * eta * 1.02) + 64);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (const double t : times)
    if (u01(rng) < eta) kept.push_back(t);
  return kept;
}

namespace {

// ceil with a relative backoff so a quotient that lands a few ulp above an
// integer (edge exactly on the grid) is not rounded past it
std::int64_t grid_ceil(double x) {
  return static_cast<std::int64_t>(std::ceil(x - std::abs(x) * 1e-12));
}

// Adds q * f(m dt - t) to the samples overlapping the pulse support.
void add_pulse(std::vector<double>& samples, double dt, double t, double q,
               const PulseShape& pulse) {
  const auto n = static_cast<std::int64_t>(samples.size());
  const std::int64_t m_lo =
      std::max<std::int64_t>(0, grid_ceil((t + pulse.support_lo()) / dt));
  if (m_lo >= n) return;

  switch (pulse.kind()) {
    case PulseKind::Rectangular: {
      // support is half-open: f = 1/w on [t - w/2, t + w/2)
      const double w = pulse.width();
      std::int64_t m_hi = grid_ceil((t + 0.5 * w) / dt);
      m_hi = std::min(m_hi, n);
      const double v = q / w;
      for (std::int64_t m = m_lo; m < m_hi; ++m) samples[static_cast<std::size_t>(m)] += v;
      break;
    }
    case PulseKind::OneSidedExponential: {
      const double w = pulse.width();
      std::int64_t m_hi =
          static_cast<std::int64_t>(std::floor((t + pulse.support_hi()) / dt)) + 1;
      m_hi = std::min(m_hi, n);
      double v = (q / w) * std::exp(-((static_cast<double>(m_lo) * dt) - t) / w);
      const double r = std::exp(-dt / w);
      for (std::int64_t m = m_lo; m < m_hi; ++m) {
        samples[static_cast<std::size_t>(m)] += v;
        v *= r;
      }
      break;
    }
    case PulseKind::Gaussian: {
      const double s = pulse.sigma();
      std::int64_t m_hi =
          static_cast<std::int64_t>(std::floor((t + pulse.support_hi()) / dt)) + 1;
      m_hi = std::min(m_hi, n);
      // two-multiply recurrence for exp(-x^2 / 2 s^2) along the grid
      const double inv2s2 = 1.0 / (2.0 * s * s);
      const double x0 = static_cast<double>(m_lo) * dt - t;
      double v = q * std::exp(-x0 * x0 * inv2s2) / (s * std::sqrt(2.0 * std::acos(-1.0)));
      double step = std::exp(-(2.0 * x0 * dt + dt * dt) * inv2s2);
      const double decay = std::exp(-2.0 * dt * dt * inv2s2);
      for (std::int64_t m = m_lo; m < m_hi; ++m) {
        samples[static_cast<std::size_t>(m)] += v;
        v *= step;
        step *= decay;
      }
      break;
    }
  }
}

void add_poisson_train(std::vector<double>& samples, double dt, double duration, double rate,
                       const DetectorModel& det, Rng& rng) {
  if (rate <= 0.0) return;
  std::poisson_distribution<long long> count(rate * duration);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const long long n = count(rng);
  for (long long i = 0; i < n; ++i) {
    const double t = u01(rng) * duration;
    add_pulse(samples, dt, t, det.gain.sample(rng), det.pulse);
  }
}

}  // namespace

CurrentTrace synthesize_trace(std::span<const double> times, const DetectorModel& det,
                              double dt, double duration, Rng& rng) {
  det.validate();
  if (!(dt > 0.0)) throw ConfigError("synthesize_trace: dt must be > 0");
  if (dt > det.pulse.width() / 10.0 * (1.0 + 1e-9))
    throw ConfigError("synthesize_trace: dt must be <= tau_p / 10");
  if (!(duration > 0.0)) throw ConfigError("synthesize_trace: duration must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  if (n == 0) throw ConfigError("synthesize_trace: duration shorter than one sample");

  CurrentTrace trace;
  trace.dt = dt;
  trace.t0 = 0.0;
  trace.samples.assign(n, 0.0);
  trace.meta.detector_id = det.id;

  for (const double t : times) add_pulse(trace.samples, dt, t, det.gain.sample(rng), det.pulse);
  add_poisson_train(trace.samples, dt, duration, det.dark_rate, det, rng);
  add_poisson_train(trace.samples, dt, duration, det.eta * det.background_flux, det, rng);

  if (det.amplifier_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, det.amplifier_noise / std::sqrt(dt));
    for (double& v : trace.samples) v += noise(rng);
  }
  return trace;
}

double mean_current_prediction(const DetectorModel& det, double flux) {
  if (!(flux >= 0.0)) throw ConfigError("mean_current_prediction: flux must be >= 0");
  return det.eta * det.gain.mean * flux;
}

double mean_current_with_noise(const DetectorModel& det, double flux) {
  return mean_current_prediction(det, flux) +
         det.gain.mean * (det.dark_rate + det.eta * det.background_flux);
}

namespace {

constexpr char kTraceMagic[5] = {'T', 'B', 'C', 'A', 'L'};
constexpr std::uint16_t kTraceVersion = 1;

template <typename T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void put_string(std::ofstream& os, const std::string& s) {
  put(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& is) {
  const auto len = get<std::uint32_t>(is);
  if (len > (1u << 20)) throw DataError("trace file: unreasonable string length");
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  return s;
}

}  // namespace

void write_trace(const std::string& path, const CurrentTrace& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write(kTraceMagic, sizeof(kTraceMagic));
  put(os, kTraceVersion);
  put(os, t.dt);
  put(os, static_cast<std::uint64_t>(t.samples.size()));
  put(os, t.t0);
  put_string(os, t.meta.detector_id);
  put_string(os, t.meta.units);
  put(os, t.meta.config_hash);
  put(os, t.meta.rng_seed);
  os.write(reinterpret_cast<const char*>(t.samples.data()),
           static_cast<std::streamsize>(t.samples.size() * sizeof(double)));
  if (!os) throw DataError("write failed: " + path);
}

CurrentTrace read_trace(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[5];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kTraceMagic, sizeof(magic)) != 0)
    throw DataError("not a trace file: " + path);
  if (get<std::uint16_t>(is) != kTraceVersion)
    throw DataError("unsupported trace file version: " + path);
  CurrentTrace t;
  t.dt = get<double>(is);
  const auto n = get<std::uint64_t>(is);
  t.t0 = get<double>(is);
  t.meta.detector_id = get_string(is);
  t.meta.units = get_string(is);
  t.meta.config_hash = get<std::uint64_t>(is);
  t.meta.rng_seed = get<std::uint64_t>(is);
  t.samples.resize(n);
  is.read(reinterpret_cast<char*>(t.samples.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw DataError("truncated trace file: " + path);
  return t;
}

void write_trace_csv(const std::string& path, const CurrentTrace& t) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.precision(17);
  os << "time,value\n";
  for (std::size_t m = 0; m < t.samples.size(); ++m)
    os << t.t0 + static_cast<double>(m) * t.dt << ',' << t.samples[m] << '\n';
  if (!os) throw DataError("write failed: " + path);
}

CurrentTrace read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty CSV trace: " + path);
  CurrentTrace t;
  std::vector<double> times;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("malformed CSV row in " + path);
    times.push_back(std::stod(line.substr(0, comma)));
    t.samples.push_back(std::stod(line.substr(comma + 1)));
  }
  if (times.size() < 2) throw DataError("CSV trace needs at least two rows: " + path);
  t.t0 = times.front();
  t.dt = times[1] - times[0];
  if (!(t.dt > 0.0)) throw DataError("CSV trace: non-increasing time column in " + path);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double expected = t.t0 + static_cast<double>(i) * t.dt;
    if (std::abs(times[i] - expected) > 1e-6 * t.dt)
      throw DataError("CSV trace: non-uniform sampling in " + path);
  }
  t.meta.detector_id = "csv-import";
  return t;
}

}  // namespace tbcal
