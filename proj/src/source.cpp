#include "tbcal/source.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include "tbcal/errors.hpp"
#include "tbcal/rng.hpp"

namespace tbcal {

namespace {

constexpr double kSpontaneousGainLimit = 1.0;   // V >= 1 is regime III
constexpr double kStimulatedGainLimit = 0.01;   // V << 1 assumption
constexpr double kConsistencyTol = 1e-6;
constexpr std::uint64_t kSlotsPerSegment = 1ull << 22;
constexpr double kSeedsPerSegment = 4e6;

// Appends one segment worth of (t1, t2) pairs, keeping both arms sorted and
// the links consistent. Segments arrive in time order, so per-segment sorting
// keeps the global arrays sorted.
void append_sorted_pairs(PairEventStream& out, std::vector<std::pair<double, double>>& pairs) {
  std::sort(pairs.begin(), pairs.end());
  const auto base1 = static_cast<std::int32_t>(out.arm1_times.size());
  const auto base2 = static_cast<std::int32_t>(out.arm2_times.size());
  std::vector<std::pair<double, std::int32_t>> a2;
  a2.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    a2.emplace_back(pairs[i].second, static_cast<std::int32_t>(i));
  std::sort(a2.begin(), a2.end());
  out.arm1_links.resize(out.arm1_links.size() + pairs.size(), -1);
  for (const auto& p : pairs) out.arm1_times.push_back(p.first);
  for (std::size_t j = 0; j < a2.size(); ++j) {
    out.arm2_times.push_back(a2[j].first);
    out.arm1_links[static_cast<std::size_t>(base1) + static_cast<std::size_t>(a2[j].second)] =
        base2 + static_cast<std::int32_t>(j);
  }
}

}  // namespace

SourceConfig SourceConfig::resolved() const {
  SourceConfig c = *this;
  if (!(c.duration > 0.0)) throw ConfigError("source.duration must be > 0");

  if (c.mode == SourceMode::Spontaneous) {
    if (c.seed_flux != 0.0)
      throw ConfigError("source.seed_flux is only meaningful in stimulated mode");
    const bool hf = is_set(c.mean_flux), hv = is_set(c.gain), ht = is_set(c.coherence_time);
    if (hf && !(c.mean_flux >= 0.0)) throw ConfigError("source.mean_flux must be >= 0");
    if (hv && !(c.gain >= 0.0)) throw ConfigError("source.gain must be >= 0");
    if (ht && !(c.coherence_time > 0.0)) throw ConfigError("source.coherence_time must be > 0");
    if (hf && hv && ht) {
      const double prod = c.mean_flux * c.coherence_time;
      const double scale = std::max(std::abs(c.gain), std::abs(prod));
      if (scale > 0.0 && std::abs(prod - c.gain) > kConsistencyTol * scale)
        throw ConfigError("source: mean_flux * coherence_time and gain are inconsistent");
      if (scale == 0.0 && (c.gain != 0.0 || c.mean_flux != 0.0))
        throw ConfigError("source: mean_flux * coherence_time and gain are inconsistent");
    } else if (hv && ht) {
      c.mean_flux = c.gain / c.coherence_time;
    } else if (hf && ht) {
      c.gain = c.mean_flux * c.coherence_time;
    } else if (hf && hv) {
      if (c.mean_flux > 0.0)
        c.coherence_time = c.gain / c.mean_flux;
      else
        throw ConfigError("source.coherence_time required when mean_flux = 0");
      if (!(c.coherence_time > 0.0))
        throw ConfigError("source.coherence_time required when gain = 0");
    } else {
      throw ConfigError("source: need two of {mean_flux, gain, coherence_time}");
    }
    if (c.gain >= kSpontaneousGainLimit)
      throw RegimeUnsupported("source.gain >= 1: regime III is not supported");
    if (c.duration / c.coherence_time > 9e15)
      throw ConfigError("source: duration / coherence_time overflows the slot count");
  } else {
    if (!is_set(c.gain) || !(c.gain >= 0.0))
      throw ConfigError("source.gain must be set and >= 0");
    if (!is_set(c.coherence_time) || !(c.coherence_time > 0.0))
      throw ConfigError("source.coherence_time must be set and > 0");
    if (c.gain > kStimulatedGainLimit)
      throw RegimeUnsupported("source.gain > 0.01: stimulated mode assumes V << 1");
    if (!(c.seed_flux > 0.0)) throw ConfigError("source.seed_flux must be > 0");
    c.mean_flux = kUnset;  // not used in stimulated mode
  }
  return c;
}

PairEventStream generate_spontaneous(const SourceConfig& cfg0) {
  const SourceConfig cfg = cfg0.resolved();
  if (cfg.mode != SourceMode::Spontaneous)
    throw ConfigError("generate_spontaneous: config mode is not spontaneous");

  PairEventStream out;
  out.duration = cfg.duration;
  out.coherence_time = cfg.coherence_time;
  out.mode = SourceMode::Spontaneous;

  const double tau = cfg.coherence_time;
  const double V = cfg.gain;
  const auto total_slots = static_cast<std::uint64_t>(std::floor(cfg.duration / tau));
  if (V <= 0.0 || total_slots == 0) return out;

  const std::uint64_t nseg = (total_slots + kSlotsPerSegment - 1) / kSlotsPerSegment;
  const auto expect = static_cast<std::size_t>(cfg.mean_flux * cfg.duration * 1.05) + 1024;
  out.arm1_times.reserve(expect);
  out.arm2_times.reserve(expect);
  out.arm1_links.reserve(expect);

  const double tmax = std::nextafter(cfg.duration, 0.0);
  std::vector<std::pair<double, double>> pairs;
  for (std::uint64_t seg = 0; seg < nseg; ++seg) {
    Rng rng = make_rng(cfg.rng_seed, streams::source, seg);
    const std::uint64_t slot0 = seg * kSlotsPerSegment;
    const std::uint64_t nslots = std::min(kSlotsPerSegment, total_slots - slot0);
    pairs.clear();
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::geometric_distribution<int> tail(1.0 / (1.0 + V));  // Bose-Einstein, mean V
    auto emit = [&](std::uint64_t slot, int n) {
      const double t0 = static_cast<double>(slot0 + slot) * tau;
      for (int i = 0; i < n; ++i) {
        const double t1 = std::min(t0 + u01(rng) * tau, tmax);
        const double t2 = std::min(t0 + u01(rng) * tau, tmax);
        pairs.emplace_back(t1, t2);
      }
    };
    if (V > 0.05) {
      // dense path: exact per-slot Bose-Einstein counts
      for (std::uint64_t s = 0; s < nslots; ++s) {
        const int n = tail(rng);
        if (n > 0) emit(s, n);
      }
    } else {
      // sparse path: slot occupancy is Bernoulli(V/(1+V)) per slot; jump
      // between occupied slots with geometric gaps and give an occupied slot
      // 1 + Geometric(1/(1+V)) pairs. Same per-slot law as the dense path in
      // O(occupied) time. (Drawing occupied slots with replacement instead
      // would inflate the slot variance to V(1+2V) via collisions and bias
      // the bunching term.)
      std::geometric_distribution<std::uint64_t> gap(V / (1.0 + V));
      for (std::uint64_t s = 0;; ++s) {
        const std::uint64_t g = gap(rng);
        if (g >= nslots - s) break;
        s += g;
        emit(s, 1 + tail(rng));
      }
    }
    append_sorted_pairs(out, pairs);
  }
  return out;
}

PairEventStream generate_stimulated(const SourceConfig& cfg0) {
  const SourceConfig cfg = cfg0.resolved();
  if (cfg.mode != SourceMode::Stimulated)
    throw ConfigError("generate_stimulated: config mode is not stimulated");

  PairEventStream out;
  out.duration = cfg.duration;
  out.coherence_time = cfg.coherence_time;
  out.mode = SourceMode::Stimulated;

  const double phi = cfg.seed_flux;
  const double V = cfg.gain;
  const double tau = cfg.coherence_time;
  const auto nseg = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::ceil(phi * cfg.duration / kSeedsPerSegment)));
  const double seg_dur = cfg.duration / static_cast<double>(nseg);

  out.arm2_times.reserve(static_cast<std::size_t>(phi * cfg.duration * (1.0 + V) * 1.02) + 1024);
  out.arm1_times.reserve(static_cast<std::size_t>(V * phi * cfg.duration * 1.2) + 1024);
  out.arm1_links.reserve(out.arm1_times.capacity());

  const double tmax = std::nextafter(cfg.duration, 0.0);
  std::vector<double> seeds;
  std::vector<std::pair<double, double>> pairs;  // (t1, extra arm2 photon)
  for (std::uint64_t seg = 0; seg < nseg; ++seg) {
    Rng rng = make_rng(cfg.rng_seed, streams::source, seg);
    const double s0 = static_cast<double>(seg) * seg_dur;
    const double s1 = (seg + 1 == nseg) ? cfg.duration : s0 + seg_dur;
    // clamp below the segment end so per-segment sorting stays global
    const double seg_max = std::min(std::nextafter(s1, 0.0), tmax);

    std::poisson_distribution<long long> count(phi * (s1 - s0));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const long long n = count(rng);
    seeds.clear();
    seeds.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) seeds.push_back(s0 + u01(rng) * (s1 - s0));
    std::sort(seeds.begin(), seeds.end());

    pairs.clear();
    if (V > 0.0) {
      std::bernoulli_distribution trigger(V);
      for (const double t : seeds) {
        if (!trigger(rng)) continue;
        const double t1 = std::min(t + u01(rng) * tau, seg_max);
        const double t2 = std::min(t + u01(rng) * tau, seg_max);
        pairs.emplace_back(t1, t2);
      }
    }
    std::sort(pairs.begin(), pairs.end());

    const auto base1 = static_cast<std::int32_t>(out.arm1_times.size());
    const auto base2 = static_cast<std::int32_t>(out.arm2_times.size());
    std::vector<std::pair<double, std::int32_t>> a2;
    a2.reserve(seeds.size() + pairs.size());
    for (const double t : seeds) a2.emplace_back(t, -1);
    for (std::size_t i = 0; i < pairs.size(); ++i)
      a2.emplace_back(pairs[i].second, static_cast<std::int32_t>(i));
    std::sort(a2.begin(), a2.end());

    out.arm1_links.resize(out.arm1_links.size() + pairs.size(), -1);
    for (const auto& p : pairs) out.arm1_times.push_back(p.first);
    for (std::size_t j = 0; j < a2.size(); ++j) {
      out.arm2_times.push_back(a2[j].first);
      if (a2[j].second >= 0)
        out.arm1_links[static_cast<std::size_t>(base1) +
                       static_cast<std::size_t>(a2[j].second)] =
            base2 + static_cast<std::int32_t>(j);
    }
  }
  return out;
}

PairEventStream generate(const SourceConfig& cfg) {
  return cfg.mode == SourceMode::Spontaneous ? generate_spontaneous(cfg)
                                             : generate_stimulated(cfg);
}

namespace {

constexpr char kEventMagic[5] = {'T', 'B', 'E', 'V', 'T'};
constexpr std::uint16_t kEventVersion = 1;

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

}  // namespace

void write_events(const std::string& path, const PairEventStream& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write(kEventMagic, sizeof(kEventMagic));
  put(os, kEventVersion);
  put(os, static_cast<std::uint8_t>(s.mode));
  put(os, s.coherence_time);
  put(os, s.duration);
  put(os, static_cast<std::uint64_t>(s.arm1_times.size()));
  put(os, static_cast<std::uint64_t>(s.arm2_times.size()));
  os.write(reinterpret_cast<const char*>(s.arm1_times.data()),
           static_cast<std::streamsize>(s.arm1_times.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(s.arm2_times.data()),
           static_cast<std::streamsize>(s.arm2_times.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(s.arm1_links.data()),
           static_cast<std::streamsize>(s.arm1_links.size() * sizeof(std::int32_t)));
  if (!os) throw DataError("write failed: " + path);
}

PairEventStream read_events(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[5];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kEventMagic, sizeof(magic)) != 0)
    throw DataError("not an event file: " + path);
  if (get<std::uint16_t>(is) != kEventVersion)
    throw DataError("unsupported event file version: " + path);
  PairEventStream s;
  s.mode = static_cast<SourceMode>(get<std::uint8_t>(is));
  s.coherence_time = get<double>(is);
  s.duration = get<double>(is);
  const auto n1 = get<std::uint64_t>(is);
  const auto n2 = get<std::uint64_t>(is);
  s.arm1_times.resize(n1);
  s.arm2_times.resize(n2);
  s.arm1_links.resize(n1);
  is.read(reinterpret_cast<char*>(s.arm1_times.data()),
          static_cast<std::streamsize>(n1 * sizeof(double)));
  is.read(reinterpret_cast<char*>(s.arm2_times.data()),
          static_cast<std::streamsize>(n2 * sizeof(double)));
  is.read(reinterpret_cast<char*>(s.arm1_links.data()),
          static_cast<std::streamsize>(n1 * sizeof(std::int32_t)));
  if (!is) throw DataError("truncated event file: " + path);
  return s;
}

}  // namespace tbcal
