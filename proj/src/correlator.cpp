#include "tbcal/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>

#include <nlohmann/json.hpp>

#include "tbcal/errors.hpp"

namespace tbcal {

namespace {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

// Biased (1/nb) lag covariances of two centered blocks. Cross records hold
// lags -L..L (index L + k), auto records 0..L. The sample loop is chunked so
// both operands stay cache resident across the lag sweep.
std::vector<double> block_lags(const double* ca, const double* cb, std::size_t nb,
                               std::int64_t L, bool auto_mode) {
  const std::size_t n_lags = auto_mode ? static_cast<std::size_t>(L) + 1
                                       : 2 * static_cast<std::size_t>(L) + 1;
  std::vector<double> acc(n_lags, 0.0);
  constexpr std::size_t kChunk = 1 << 13;
  for (std::size_t c0 = 0; c0 < nb; c0 += kChunk) {
    const std::size_t c1 = std::min(c0 + kChunk, nb);
    for (std::int64_t k = 0; k <= L; ++k) {
      const std::size_t hi = std::min(c1, nb - static_cast<std::size_t>(k));
      if (hi > c0)
        acc[auto_mode ? static_cast<std::size_t>(k) : static_cast<std::size_t>(L + k)] +=
            dot(ca + c0, cb + c0 + k, hi - c0);
    }
    if (!auto_mode) {
      for (std::int64_t k = 1; k <= L; ++k) {
        const std::size_t hi = std::min(c1, nb - static_cast<std::size_t>(k));
        if (hi > c0)
          acc[static_cast<std::size_t>(L - k)] += dot(ca + c0 + k, cb + c0, hi - c0);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(nb);
  for (double& v : acc) v *= inv;
  return acc;
}

void center_block(const double* src, std::size_t nb, std::vector<double>& out) {
  out.resize(nb);
  double mean = 0.0;
  for (std::size_t i = 0; i < nb; ++i) mean += src[i];
  mean /= static_cast<double>(nb);
  for (std::size_t i = 0; i < nb; ++i) out[i] = src[i] - mean;
}

double trapezoid(const std::vector<double>& v, double dt) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (const double x : v) s += x;
  s -= 0.5 * (v.front() + v.back());
  return s * dt;
}

}  // namespace

CorrelationRecord covariance(const CurrentTrace& a, const CurrentTrace& b, double tau_max,
                             int n_segments, int threads) {
  const bool auto_mode = &a == &b;
  if (a.samples.size() != b.samples.size())
    throw DataError("covariance: traces have different lengths");
  if (std::abs(a.dt - b.dt) > 1e-12 * a.dt) throw DataError("covariance: dt mismatch");
  if (std::abs(a.t0 - b.t0) > 1e-9 * a.dt) throw DataError("covariance: t0 misaligned");
  if (n_segments < 2) throw ConfigError("covariance: n_segments must be >= 2");
  const auto L = static_cast<std::int64_t>(std::llround(tau_max / a.dt));
  if (L < 1) throw ConfigError("covariance: tau_max shorter than one sample");
  const double duration = static_cast<double>(a.samples.size()) * a.dt;
  if (duration < 20.0 * static_cast<double>(n_segments) * tau_max * (1.0 - 1e-9))
    throw DataError("covariance: trace duration must be >= 20 * n_segments * tau_max");

  const std::size_t nb = a.samples.size() / static_cast<std::size_t>(n_segments);
  const std::size_t n_lags = auto_mode ? static_cast<std::size_t>(L) + 1
                                       : 2 * static_cast<std::size_t>(L) + 1;

  std::vector<std::vector<double>> per_block(static_cast<std::size_t>(n_segments));
  auto run_block = [&](int blk) {
    std::vector<double> ca, cb;
    const std::size_t off = static_cast<std::size_t>(blk) * nb;
    center_block(a.samples.data() + off, nb, ca);
    if (auto_mode) return block_lags(ca.data(), ca.data(), nb, L, true);
    center_block(b.samples.data() + off, nb, cb);
    return block_lags(ca.data(), cb.data(), nb, L, false);
  };

  if (threads <= 1) {
    for (int blk = 0; blk < n_segments; ++blk) per_block[static_cast<std::size_t>(blk)] = run_block(blk);
  } else {
    std::vector<std::future<std::vector<double>>> jobs;
    jobs.reserve(static_cast<std::size_t>(n_segments));
    for (int blk = 0; blk < n_segments; ++blk)
      jobs.push_back(std::async(std::launch::async, run_block, blk));
    for (int blk = 0; blk < n_segments; ++blk)
      per_block[static_cast<std::size_t>(blk)] = jobs[static_cast<std::size_t>(blk)].get();
  }

  CorrelationRecord rec;
  rec.dt = a.dt;
  rec.n_segments = n_segments;
  rec.auto_mode = auto_mode;
  rec.mean_a = a.mean();
  rec.mean_b = auto_mode ? rec.mean_a : b.mean();
  rec.lags.resize(n_lags);
  for (std::size_t i = 0; i < n_lags; ++i)
    rec.lags[i] = (auto_mode ? static_cast<double>(i)
                             : static_cast<double>(static_cast<std::int64_t>(i) - L)) *
                  a.dt;

  const double B = static_cast<double>(n_segments);
  rec.values.assign(n_lags, 0.0);
  rec.stderrs.assign(n_lags, 0.0);
  for (const auto& blk : per_block)
    for (std::size_t i = 0; i < n_lags; ++i) rec.values[i] += blk[i];
  for (double& v : rec.values) v /= B;
  for (const auto& blk : per_block)
    for (std::size_t i = 0; i < n_lags; ++i) {
      const double d = blk[i] - rec.values[i];
      rec.stderrs[i] += d * d;
    }
  for (double& s : rec.stderrs) s = std::sqrt(s / (B - 1.0) / B);

  rec.block_integrals.reserve(per_block.size());
  for (const auto& blk : per_block) rec.block_integrals.push_back(trapezoid(blk, a.dt));
  return rec;
}

CorrelationRecord auto_covariance(const CurrentTrace& a, double tau_max, int n_segments,
                                  int threads) {
  return covariance(a, a, tau_max, n_segments, threads);
}

IntegralResult integrate(const CorrelationRecord& record) {
  if (record.lags.size() < 2) throw DataError("integrate: record too short");
  IntegralResult r;
  r.value = trapezoid(record.values, record.dt);

  if (record.block_integrals.size() == static_cast<std::size_t>(record.n_segments) &&
      record.n_segments >= 2) {
    const double B = static_cast<double>(record.n_segments);
    double mean = 0.0;
    for (const double v : record.block_integrals) mean += v;
    mean /= B;
    double var = 0.0;
    for (const double v : record.block_integrals) var += (v - mean) * (v - mean);
    r.stderr_ = std::sqrt(var / (B - 1.0) / B);
  } else {
    // fallback: propagate per-lag errors assuming block independence
    double s2 = 0.0;
    for (std::size_t i = 0; i < record.stderrs.size(); ++i) {
      const double w = (i == 0 || i + 1 == record.stderrs.size()) ? 0.5 : 1.0;
      const double c = w * record.dt * record.stderrs[i];
      s2 += c * c;
    }
    r.stderr_ = std::sqrt(s2);
  }

  auto decayed_at = [&](std::size_t i) {
    return std::abs(record.values[i]) <= 2.0 * record.stderrs[i];
  };
  r.window_decayed = decayed_at(record.values.size() - 1) &&
                     (record.auto_mode || decayed_at(0));
  return r;
}

CorrelationRecord subtract_records(const CorrelationRecord& a, const CorrelationRecord& b) {
  if (a.lags.size() != b.lags.size() || std::abs(a.dt - b.dt) > 1e-12 * a.dt)
    throw DataError("subtract_records: lag grids differ");
  for (std::size_t i = 0; i < a.lags.size(); ++i)
    if (std::abs(a.lags[i] - b.lags[i]) > 1e-9 * a.dt)
      throw DataError("subtract_records: lag grids differ");
  CorrelationRecord out = a;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    out.values[i] = a.values[i] - b.values[i];
    out.stderrs[i] = std::hypot(a.stderrs[i], b.stderrs[i]);
  }
  out.block_integrals.clear();  // blocks of the two acquisitions are unpaired
  return out;
}

void write_record_csv(const std::string& path, const CorrelationRecord& r) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.precision(17);
  os << "lag_seconds,value,stderr\n";
  for (std::size_t i = 0; i < r.lags.size(); ++i)
    os << r.lags[i] << ',' << r.values[i] << ',' << r.stderrs[i] << '\n';
  if (!os) throw DataError("write failed: " + path);
}

void write_record_sidecar(const std::string& path, const CorrelationRecord& r,
                          const std::string& provenance_json) {
  nlohmann::json j;
  j["mean_a"] = r.mean_a;
  j["mean_b"] = r.mean_b;
  j["n_segments"] = r.n_segments;
  j["dt"] = r.dt;
  j["auto"] = r.auto_mode;
  if (!provenance_json.empty()) j["provenance"] = nlohmann::json::parse(provenance_json);
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

}  // namespace tbcal
