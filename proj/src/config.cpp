#include "tbcal/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tbcal/errors.hpp"

namespace tbcal {

namespace {

const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                              const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key + ": missing");
  return *it;
}

double number(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const nlohmann::json& j, const std::string& key, double fallback,
                 const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return it->get<double>();
}

SourceMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "spontaneous") return SourceMode::Spontaneous;
  if (s == "stimulated") return SourceMode::Stimulated;
  throw ConfigError(path + ".mode: expected \"spontaneous\" or \"stimulated\"");
}

PulseKind parse_pulse(const std::string& s, const std::string& path) {
  if (s == "rectangular") return PulseKind::Rectangular;
  if (s == "one_sided_exponential") return PulseKind::OneSidedExponential;
  if (s == "gaussian") return PulseKind::Gaussian;
  throw ConfigError(path + ".shape: unknown pulse shape \"" + s + "\"");
}

std::string pulse_name(PulseKind k) {
  switch (k) {
    case PulseKind::Rectangular: return "rectangular";
    case PulseKind::OneSidedExponential: return "one_sided_exponential";
    case PulseKind::Gaussian: return "gaussian";
  }
  return "?";
}

GainKind parse_gain(const std::string& s, const std::string& path) {
  if (s == "deterministic") return GainKind::Deterministic;
  if (s == "exponential") return GainKind::Exponential;
  if (s == "gamma") return GainKind::Gamma;
  throw ConfigError(path + ".dist: unknown gain distribution \"" + s + "\"");
}

std::string gain_name(GainKind k) {
  switch (k) {
    case GainKind::Deterministic: return "deterministic";
    case GainKind::Exponential: return "exponential";
    case GainKind::Gamma: return "gamma";
  }
  return "?";
}

SourceConfig source_from_json(const nlohmann::json& j) {
  SourceConfig s;
  s.mode = parse_mode(require(j, "mode", "source").get<std::string>(), "source");
  s.mean_flux = number_or(j, "mean_flux", kUnset, "source");
  s.gain = number_or(j, "gain", kUnset, "source");
  s.coherence_time = number_or(j, "coherence_time", kUnset, "source");
  s.seed_flux = number_or(j, "seed_flux", 0.0, "source");
  s.duration = number(j, "duration", "source");
  s.rng_seed = require(j, "rng_seed", "source").get<std::uint64_t>();
  return s;
}

nlohmann::json source_to_json(const SourceConfig& s) {
  nlohmann::json j;
  j["mode"] = s.mode == SourceMode::Spontaneous ? "spontaneous" : "stimulated";
  if (is_set(s.mean_flux)) j["mean_flux"] = s.mean_flux;
  if (is_set(s.gain)) j["gain"] = s.gain;
  if (is_set(s.coherence_time)) j["coherence_time"] = s.coherence_time;
  j["seed_flux"] = s.seed_flux;
  j["duration"] = s.duration;
  j["rng_seed"] = s.rng_seed;
  return j;
}

DetectorModel detector_from_json(const nlohmann::json& j, const std::string& path) {
  DetectorModel d;
  d.id = j.value("id", path);
  d.eta = number(j, "eta", path);
  const auto& p = require(j, "pulse", path);
  d.pulse = PulseShape(parse_pulse(require(p, "shape", path + ".pulse").get<std::string>(),
                                   path + ".pulse"),
                       number(p, "width", path + ".pulse"));
  if (auto it = j.find("gain"); it != j.end()) {
    d.gain.kind = parse_gain(require(*it, "dist", path + ".gain").get<std::string>(),
                             path + ".gain");
    d.gain.mean = number_or(*it, "mean", 1.0, path + ".gain");
    d.gain.shape = number_or(*it, "shape", 1.0, path + ".gain");
  }
  d.dark_rate = number_or(j, "dark_rate", 0.0, path);
  d.amplifier_noise = number_or(j, "amplifier_noise", 0.0, path);
  d.background_flux = number_or(j, "background_flux", 0.0, path);
  return d;
}

nlohmann::json detector_to_json(const DetectorModel& d) {
  nlohmann::json j;
  j["id"] = d.id;
  j["eta"] = d.eta;
  j["pulse"] = {{"shape", pulse_name(d.pulse.kind())}, {"width", d.pulse.width()}};
  j["gain"] = {{"dist", gain_name(d.gain.kind)}, {"mean", d.gain.mean}, {"shape", d.gain.shape}};
  j["dark_rate"] = d.dark_rate;
  j["amplifier_noise"] = d.amplifier_noise;
  j["background_flux"] = d.background_flux;
  return j;
}

}  // namespace

EstimatorKind estimator_kind_from_string(const std::string& s) {
  if (s == "ratio_spdc") return EstimatorKind::RatioSPDC;
  if (s == "integrated_spdc") return EstimatorKind::IntegratedSPDC;
  if (s == "ratio_stimulated") return EstimatorKind::RatioStimulated;
  if (s == "integrated_stimulated") return EstimatorKind::IntegratedStimulated;
  throw ConfigError("estimators.kind: unknown estimator \"" + s + "\"");
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.source = source_from_json(require(j, "source", "config"));
  c.detector1 = detector_from_json(require(j, "detector1", "config"), "detector1");
  c.detector2 = detector_from_json(require(j, "detector2", "config"), "detector2");
  const auto& a = require(j, "acquisition", "config");
  c.acquisition.dt = number(a, "dt", "acquisition");
  c.acquisition.tau_max = number(a, "tau_max", "acquisition");
  c.acquisition.n_segments =
      static_cast<int>(number_or(a, "n_segments", 16.0, "acquisition"));
  if (auto it = j.find("estimators"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("estimators: expected an array");
    for (const auto& e : *it) {
      EstimatorSelection sel;
      sel.kind = estimator_kind_from_string(require(e, "kind", "estimators").get<std::string>());
      sel.excess_noise = number_or(e, "excess_noise", 1.0, "estimators");
      sel.q1_mean = number_or(e, "q1_mean", 1.0, "estimators");
      sel.tau_eval = number_or(e, "tau_eval", 0.0, "estimators");
      sel.average_band = number_or(e, "average_band", 0.0, "estimators");
      if (auto q2 = e.find("q2_mean"); q2 != e.end()) sel.q2_mean = q2->get<double>();
      c.estimators.push_back(sel);
    }
  }
  c.unpumped_run = j.value("unpumped_run", false);
  if (auto it = j.find("systematics"); it != j.end()) {
    c.systematics.loss_correction = number_or(*it, "loss_correction", 0.0, "systematics");
    c.systematics.loss_uncertainty = number_or(*it, "loss_uncertainty", 2e-3, "systematics");
  }
  c.threads = static_cast<int>(number_or(j, "threads", 1.0, "config"));
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["source"] = source_to_json(source);
  j["detector1"] = detector_to_json(detector1);
  j["detector2"] = detector_to_json(detector2);
  j["acquisition"] = {{"dt", acquisition.dt},
                      {"tau_max", acquisition.tau_max},
                      {"n_segments", acquisition.n_segments}};
  j["estimators"] = nlohmann::json::array();
  for (const auto& e : estimators) {
    nlohmann::json je = {{"kind", to_string(e.kind)},
                         {"excess_noise", e.excess_noise},
                         {"q1_mean", e.q1_mean},
                         {"tau_eval", e.tau_eval},
                         {"average_band", e.average_band}};
    if (e.q2_mean) je["q2_mean"] = *e.q2_mean;
    j["estimators"].push_back(je);
  }
  j["unpumped_run"] = unpumped_run;
  j["systematics"] = {{"loss_correction", systematics.loss_correction},
                      {"loss_uncertainty", systematics.loss_uncertainty}};
  j["threads"] = threads;
  return j;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void RunConfig::validate() const {
  const SourceConfig src = source.resolved();  // throws on bad source fields
  detector1.validate();
  detector2.validate();
  const double tp_min = std::min(detector1.pulse.width(), detector2.pulse.width());
  const double tp_max = std::max(detector1.pulse.width(), detector2.pulse.width());
  if (!(acquisition.dt > 0.0)) throw ConfigError("acquisition.dt must be > 0");
  if (acquisition.dt > tp_min / 10.0 * (1.0 + 1e-9))
    throw ConfigError("acquisition.dt must be <= min(tau_p) / 10");
  if (acquisition.tau_max < 5.0 * tp_max * (1.0 - 1e-9))
    throw ConfigError("acquisition.tau_max must be >= 5 * max(tau_p)");
  if (acquisition.n_segments < 2) throw ConfigError("acquisition.n_segments must be >= 2");
  if (src.duration <
      20.0 * static_cast<double>(acquisition.n_segments) * acquisition.tau_max * (1.0 - 1e-9))
    throw ConfigError("source.duration must be >= 20 * n_segments * tau_max");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  for (const auto& e : estimators) {
    if (!(e.excess_noise >= 1.0)) throw ConfigError("estimators.excess_noise must be >= 1");
    if (!(e.q1_mean > 0.0)) throw ConfigError("estimators.q1_mean must be > 0");
    if (std::abs(e.tau_eval) > acquisition.tau_max)
      throw ConfigError("estimators.tau_eval must lie within [-tau_max, tau_max]");
  }
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t RunConfig::hash() const {
  const std::string canonical = to_json().dump();  // objects are key-sorted
  return fnv1a64(canonical.data(), canonical.size());
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const auto n = static_cast<std::size_t>(is.gcount());
    const auto* p = reinterpret_cast<const unsigned char*>(buf);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
    if (n < sizeof(buf)) break;
  }
  return h;
}

}  // namespace tbcal
