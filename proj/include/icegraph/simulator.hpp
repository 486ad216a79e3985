// Copyright 2026 The icegraph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file simulator.hpp
 * @brief Toy Monte-Carlo for weighted single-muon and muon-bundle events.
 *
 * Signal is one muon whose energy losses are dominated by rare, heavy-tailed
 * bursts. Background is a bundle of muons sharing the primary energy along a
 * common axis; the summed loss profile is smooth. Energies are drawn from a
 * hard generation spectrum and re-weighted to the physical one.
 *
 * Light model: each loss segment is a point source, expected photoelectrons
 * at distance r are loss * kappa * exp(-r / absorption) / r^2 with r >= 1 m.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "icegraph/error.hpp"
#include "icegraph/event.hpp"
#include "icegraph/geometry.hpp"
#include "icegraph/parallel.hpp"
#include "icegraph/rng.hpp"
#include "icegraph/text.hpp"

namespace icegraph {

/// Power-law energy spectrum of one event class.
struct ClassSpectrum {
  double index_true = 2.0;   // physical dN/dE ~ E^-index_true
  double index_gen = 1.0;    // generation spectrum, harder
  double e_min = 1e2;        // GeV
  double e_max = 1e8;        // GeV
  double events_per_year = 1.0;  // sum of weights of a generated set
};

struct SimConfig {
  ClassSpectrum signal{2.0, 1.0, 1e2, 1e6, 10.0};
  ClassSpectrum background{2.7, 2.0, 6e2, 1e5, 100.0};
  int multiplicity_min = 1;
  int multiplicity_max = 200;
  double min_muon_energy = 200.0;  // GeV per bundle muon; caps multiplicity at E/min_muon_energy when > 0

  double continuous_loss = 0.2;           // GeV/m
  double stochastic_coefficient = 3.3e-4;  // 1/m, mean stochastic loss per meter = coefficient * E
  double burst_rate = 0.01;               // bursts per meter
  double burst_sigma_log = 1.0;           // log-normal width of a burst

  double absorption_length = 30.0;  // m
  double segment_length = 10.0;     // m
  double photons_per_gev = 300.0;   // kappa, pe * m^2 / GeV
  double volume_padding = 50.0;     // m around the instrumented box
  double anchor_margin = 200.0;     // m
  double first_pulse_min_fraction = 0.3;
  double scattering_time = 20.0;     // ns
  double refractive_index = 1.32;
  double light_speed = 0.3;         // m/ns in vacuum
  double prune_expectation = 1e-9;  // pe; modules whose upper bound is below this are skipped
  double saturation_charge = 2e4;  // pe, soft ceiling of the expected charge per module
  int min_hits = 8;
  int max_attempts = 100000;
  std::uint64_t seed = 1;

  void validate() const {
    for (const auto* s : {&signal, &background}) {
      if (!(s->index_gen < s->index_true)) throw ConfigError("generation spectral index must be harder than the true index");
      if (!(s->e_min > 0 && s->e_min < s->e_max)) throw ConfigError("energy range must satisfy 0 < e_min < e_max");
      if (!(s->events_per_year > 0)) throw ConfigError("events_per_year must be > 0");
    }
    if (multiplicity_min < 1 || multiplicity_max < multiplicity_min) throw ConfigError("bad bundle multiplicity range");
    if (min_hits < 1) throw ConfigError("min_hits must be >= 1");
    if (!(absorption_length > 0) || !(segment_length > 0)) throw ConfigError("lengths must be > 0");
    if (!(burst_sigma_log >= 1.0)) throw ConfigError("burst_sigma_log must be >= 1");
    if (!(burst_rate > 0) || !(photons_per_gev > 0)) throw ConfigError("rates must be > 0");
    if (!(first_pulse_min_fraction > 0 && first_pulse_min_fraction <= 1)) throw ConfigError("first_pulse_min_fraction in (0,1]");
    if (!(saturation_charge > 0)) throw ConfigError("saturation_charge must be > 0");
    if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  }

  const ClassSpectrum& spectrum(Label l) const { return l == Label::signal ? signal : background; }
};

/// Reads a flat key=value config over the defaults. Unknown keys are rejected.
inline SimConfig sim_config_from(const text::KeyValues& kv, SimConfig c = {}) {
  for (const auto& [key, value] : kv) {
    auto d = [&] { return text::parse_double(value); };
    if (key == "signal.spectral_index_true") c.signal.index_true = d();
    else if (key == "signal.spectral_index_gen") c.signal.index_gen = d();
    else if (key == "signal.energy_min") c.signal.e_min = d();
    else if (key == "signal.energy_max") c.signal.e_max = d();
    else if (key == "signal.events_per_year") c.signal.events_per_year = d();
    else if (key == "background.spectral_index_true") c.background.index_true = d();
    else if (key == "background.spectral_index_gen") c.background.index_gen = d();
    else if (key == "background.energy_min") c.background.e_min = d();
    else if (key == "background.energy_max") c.background.e_max = d();
    else if (key == "background.events_per_year") c.background.events_per_year = d();
    else if (key == "bundle_multiplicity_min") c.multiplicity_min = text::parse_int<int>(value);
    else if (key == "bundle_multiplicity_max") c.multiplicity_max = text::parse_int<int>(value);
    else if (key == "min_muon_energy") c.min_muon_energy = d();
    else if (key == "continuous_loss") c.continuous_loss = d();
    else if (key == "stochastic_coefficient") c.stochastic_coefficient = d();
    else if (key == "burst_rate") c.burst_rate = d();
    else if (key == "burst_sigma_log") c.burst_sigma_log = d();
    else if (key == "absorption_length") c.absorption_length = d();
    else if (key == "segment_length") c.segment_length = d();
    else if (key == "photons_per_gev") c.photons_per_gev = d();
    else if (key == "volume_padding") c.volume_padding = d();
    else if (key == "anchor_margin") c.anchor_margin = d();
    else if (key == "first_pulse_min_fraction") c.first_pulse_min_fraction = d();
    else if (key == "scattering_time") c.scattering_time = d();
    else if (key == "refractive_index") c.refractive_index = d();
    else if (key == "saturation_charge") c.saturation_charge = d();
    else if (key == "min_hits") c.min_hits = text::parse_int<int>(value);
    else if (key == "max_attempts") c.max_attempts = text::parse_int<int>(value);
    else if (key == "seed") c.seed = text::parse_int<std::uint64_t>(value);
    else throw ConfigError("unknown simulation config key '" + key + "'");
  }
  c.validate();
  return c;
}

inline text::KeyValues to_key_values(const SimConfig& c) {
  using text::format_double;
  return {
      {"signal.spectral_index_true", format_double(c.signal.index_true)},
      {"signal.spectral_index_gen", format_double(c.signal.index_gen)},
      {"signal.energy_min", format_double(c.signal.e_min)},
      {"signal.energy_max", format_double(c.signal.e_max)},
      {"signal.events_per_year", format_double(c.signal.events_per_year)},
      {"background.spectral_index_true", format_double(c.background.index_true)},
      {"background.spectral_index_gen", format_double(c.background.index_gen)},
      {"background.energy_min", format_double(c.background.e_min)},
      {"background.energy_max", format_double(c.background.e_max)},
      {"background.events_per_year", format_double(c.background.events_per_year)},
      {"bundle_multiplicity_min", std::to_string(c.multiplicity_min)},
      {"bundle_multiplicity_max", std::to_string(c.multiplicity_max)},
      {"min_muon_energy", format_double(c.min_muon_energy)},
      {"continuous_loss", format_double(c.continuous_loss)},
      {"stochastic_coefficient", format_double(c.stochastic_coefficient)},
      {"burst_rate", format_double(c.burst_rate)},
      {"burst_sigma_log", format_double(c.burst_sigma_log)},
      {"absorption_length", format_double(c.absorption_length)},
      {"segment_length", format_double(c.segment_length)},
      {"photons_per_gev", format_double(c.photons_per_gev)},
      {"volume_padding", format_double(c.volume_padding)},
      {"anchor_margin", format_double(c.anchor_margin)},
      {"first_pulse_min_fraction", format_double(c.first_pulse_min_fraction)},
      {"scattering_time", format_double(c.scattering_time)},
      {"refractive_index", format_double(c.refractive_index)},
      {"saturation_charge", format_double(c.saturation_charge)},
      {"min_hits", std::to_string(c.min_hits)},
      {"max_attempts", std::to_string(c.max_attempts)},
      {"seed", std::to_string(c.seed)},
  };
}

// ---------------------------------------------------------------------------
// Spectra and weights

/// Inverse-CDF draw from E^-index on [e_min, e_max].
inline double sample_power_law(double u, double index, double e_min, double e_max) {
  if (std::abs(index - 1.0) < 1e-12) return e_min * std::pow(e_max / e_min, u);
  const double a = 1.0 - index;
  const double lo = std::pow(e_min, a);
  const double hi = std::pow(e_max, a);
  return std::pow(lo + u * (hi - lo), 1.0 / a);
}

/// CDF of E^-index on [e_min, e_max].
inline double power_law_cdf(double e, double index, double e_min, double e_max) {
  if (e <= e_min) return 0.0;
  if (e >= e_max) return 1.0;
  if (std::abs(index - 1.0) < 1e-12) return std::log(e / e_min) / std::log(e_max / e_min);
  const double a = 1.0 - index;
  return (std::pow(e, a) - std::pow(e_min, a)) / (std::pow(e_max, a) - std::pow(e_min, a));
}

/// Un-normalized importance weight E^-(index_true - index_gen).
inline double event_weight(double energy, const ClassSpectrum& s) {
  if (!(energy >= s.e_min && energy <= s.e_max))
    throw DomainError("energy " + text::format_double(energy) + " GeV outside the generation range");
  return std::pow(energy, -(s.index_true - s.index_gen));
}

/// Rescales the weights of `events` so they sum to `total`.
inline void normalize_weights(std::vector<Event>& events, double total) {
  double sum = 0;
  for (const auto& e : events) sum += e.weight;
  if (events.empty()) return;
  if (!(sum > 0)) throw NumericalError("cannot normalize weights with a non-positive sum");
  const double scale = total / sum;
  for (auto& e : events) e.weight *= scale;
}

// ---------------------------------------------------------------------------
// Tracks

/// Entry/exit line parameters of `anchor + t * dir` through `box`, if any.
inline std::optional<std::pair<double, double>> intersect_box(const Vec3& anchor, const Vec3& dir, const Box& box) {
  double t0 = -HUGE_VAL;
  double t1 = HUGE_VAL;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(dir[k]) < 1e-300) {
      if (anchor[k] < box.lo[k] || anchor[k] > box.hi[k]) return std::nullopt;
      continue;
    }
    double a = (box.lo[k] - anchor[k]) / dir[k];
    double b = (box.hi[k] - anchor[k]) / dir[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::make_pair(t0, t1);
}

/// Log-uniform bundle multiplicity, capped by the per-muon energy floor.
inline int sample_multiplicity(CounterRng& rng, const SimConfig& config, double energy) {
  int hi = config.multiplicity_max;
  if (config.min_muon_energy > 0)
    hi = std::clamp(static_cast<int>(std::floor(energy / config.min_muon_energy)), config.multiplicity_min, hi);
  const double lo = std::log(static_cast<double>(config.multiplicity_min));
  const double span = std::log(static_cast<double>(hi) + 1.0) - lo;
  const int m = static_cast<int>(std::floor(std::exp(lo + span * rng.uniform())));
  return std::clamp(m, config.multiplicity_min, hi);
}

/// Anchor uniform in the inflated bounding box, direction uniform on the
/// downward hemisphere, energy from the generation spectrum of `label`.
inline Track sample_track(CounterRng& rng, const SimConfig& config, const DetectorGeometry& geometry, Label label = Label::signal) {
  if (geometry.empty()) throw DomainError("sample_track needs a non-empty geometry");
  const Box box = geometry.bounding_box().inflated(config.anchor_margin);
  Track t;
  for (int k = 0; k < 3; ++k) t.anchor[k] = rng.uniform(box.lo[k], box.hi[k]);
  const double cos_z = -rng.uniform();  // dz uniform in (-1, 0]
  const double phi = 2.0 * M_PI * rng.uniform();
  const double sin_z = std::sqrt(std::max(0.0, 1.0 - cos_z * cos_z));
  t.direction = Vec3(sin_z * std::cos(phi), sin_z * std::sin(phi), cos_z).normalized();
  const auto& s = config.spectrum(label);
  t.energy = std::clamp(sample_power_law(rng.uniform(), s.index_gen, s.e_min, s.e_max), s.e_min, s.e_max);
  t.multiplicity = label == Label::signal ? 1 : sample_multiplicity(rng, config, t.energy);
  return t;
}

// ---------------------------------------------------------------------------
// Energy deposition

struct Deposit {
  Vec3 center = Vec3::Zero();
  double arc = 0;          // m from the volume entry point to the segment center
  double energy_loss = 0;  // GeV
};

using DepositProfile = std::vector<Deposit>;

/// Volume in which energy is deposited: the instrumented box plus padding.
inline Box deposition_volume(const DetectorGeometry& geometry, const SimConfig& config) {
  return geometry.bounding_box().inflated(config.volume_padding);
}

namespace detail {

// Adds one muon's losses into `loss`, segment by segment, starting with `energy`.
inline void add_muon_losses(double energy, const std::vector<double>& seg_len, CounterRng& rng, const SimConfig& c,
                            std::vector<double>& loss) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sig = c.burst_sigma_log;
  for (std::size_t k = 0; k < seg_len.size() && energy > 0; ++k) {
    const double len = seg_len[k];
    double l = c.continuous_loss * len;
    std::poisson_distribution<int> n_bursts(c.burst_rate * len);
    const int nb = n_bursts(rng);
    const double mean_burst = c.stochastic_coefficient * energy / c.burst_rate;
    for (int b = 0; b < nb; ++b) l += mean_burst * std::exp(sig * normal(rng) - 0.5 * sig * sig);
    l = std::min(l, energy);
    loss[k] += l;
    energy -= l;
  }
}

}  // namespace detail

/// Chops the track into segments inside the deposition volume and assigns
/// each its energy loss. Empty when the track misses the volume.
inline DepositProfile deposit_profile(const Track& track, CounterRng& rng, Label label, const SimConfig& config,
                                      const Box& volume) {
  const auto hit = intersect_box(track.anchor, track.direction, volume);
  if (!hit) return {};
  const double length = hit->second - hit->first;
  if (!(length > 0)) return {};
  const auto n_seg = static_cast<std::size_t>(std::ceil(length / config.segment_length));
  std::vector<double> seg_len(n_seg, config.segment_length);
  seg_len.back() = length - config.segment_length * static_cast<double>(n_seg - 1);

  std::vector<double> loss(n_seg, 0.0);
  if (label == Label::signal) {
    detail::add_muon_losses(track.energy, seg_len, rng, config, loss);
  } else {
    const int m = std::max(1, track.multiplicity);
    for (int i = 0; i < m; ++i) detail::add_muon_losses(track.energy / m, seg_len, rng, config, loss);
  }

  DepositProfile profile(n_seg);
  const Vec3 entry = track.anchor + hit->first * track.direction;
  for (std::size_t k = 0; k < n_seg; ++k) {
    const double arc = config.segment_length * static_cast<double>(k) + 0.5 * seg_len[k];
    profile[k] = {entry + arc * track.direction, arc, loss[k]};
  }
  return profile;
}

inline DepositProfile deposit_profile(const Track& track, CounterRng& rng, Label label, const SimConfig& config,
                                      const DetectorGeometry& geometry) {
  return deposit_profile(track, rng, label, config, deposition_volume(geometry, config));
}

// ---------------------------------------------------------------------------
// Detector response

/// Expected photoelectrons at `p` from every segment of the profile.
inline double expected_charge(const DepositProfile& profile, const Vec3& p, const SimConfig& config) {
  double mu = 0;
  for (const auto& d : profile) {
    const double r = std::max(1.0, (p - d.center).norm());
    mu += d.energy_loss * config.photons_per_gev * std::exp(-r / config.absorption_length) / (r * r);
  }
  return mu;
}

/// Soft module saturation: mu -> s (1 - exp(-mu / s)); identity for s = inf.
inline double saturate(double mu, double s) {
  if (!std::isfinite(s)) return mu;
  return -s * std::expm1(-mu / s);
}

namespace detail {
inline double distance_to_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}
}  // namespace detail

/// Poisson-samples the charge at every module and emits the non-zero ones,
/// in dom_id order.
inline std::vector<Hit> detector_response(const DepositProfile& profile, const DetectorGeometry& geometry, CounterRng& rng,
                                          const SimConfig& config) {
  std::vector<Hit> hits;
  if (profile.empty()) return hits;
  double total = 0;
  for (const auto& d : profile) total += d.energy_loss;
  if (!(total > 0)) return hits;

  const Vec3& first = profile.front().center;
  const Vec3& last = profile.back().center;
  const double c_light = config.light_speed;
  const double c_ice = config.light_speed / config.refractive_index;

  for (const auto& dom : geometry.doms()) {
    // Every segment center lies on [first, last], so this bounds the expectation.
    const double dmin = std::max(1.0, detail::distance_to_segment(dom.position, first, last));
    const double bound = total * config.photons_per_gev * std::exp(-dmin / config.absorption_length) / (dmin * dmin);
    if (bound < config.prune_expectation) continue;

    const double mu = saturate(expected_charge(profile, dom.position, config), config.saturation_charge);
    if (!(mu > 0)) continue;
    std::poisson_distribution<long long> pois(mu);
    const auto q = static_cast<double>(pois(rng));
    if (q <= 0) continue;

    std::size_t nearest = 0;
    double best = HUGE_VAL;
    for (std::size_t k = 0; k < profile.size(); ++k) {
      const double r = (dom.position - profile[k].center).squaredNorm();
      if (r < best) {
        best = r;
        nearest = k;
      }
    }
    const double u = rng.uniform(config.first_pulse_min_fraction, 1.0);
    const double t_geo = profile[nearest].arc / c_light + std::sqrt(best) / c_ice;
    const double t_scatter = -config.scattering_time * std::log(rng.uniform_pos());
    hits.push_back({dom.dom_id, u * q, q, t_geo + t_scatter});
  }
  return hits;
}

// ---------------------------------------------------------------------------
// Datasets

/// Stream id for the `index`-th event of a class; the classes never share streams.
inline std::uint64_t event_stream(Label label, std::uint64_t index) {
  return (label == Label::signal ? 0ULL : (1ULL << 63)) | index;
}

/// One event with at least `min_hits` hits, resampling rejected tracks.
/// The weight is un-normalized.
inline Event simulate_event(CounterRng rng, Label label, const SimConfig& config, const DetectorGeometry& geometry) {
  const Box volume = deposition_volume(geometry, config);
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Event e;
    e.label = label;
    e.truth = sample_track(rng, config, geometry, label);
    const auto profile = deposit_profile(e.truth, rng, label, config, volume);
    e.hits = detector_response(profile, geometry, rng, config);
    if (static_cast<int>(e.hits.size()) < config.min_hits) continue;
    e.weight = event_weight(e.truth.energy, config.spectrum(label));
    return e;
  }
  throw NumericalError("no event with >= " + std::to_string(config.min_hits) + " hits after " +
                       std::to_string(config.max_attempts) + " attempts");
}

/// `n_signal` signal events followed by `n_background` background events.
/// Weights are normalized per class to the configured annual totals.
inline std::vector<Event> generate_dataset(const SimConfig& config, const DetectorGeometry& geometry, std::size_t n_signal,
                                           std::size_t n_background, unsigned threads = 1) {
  config.validate();
  std::vector<Event> events(n_signal + n_background);
  const CounterRng root(config.seed);
  parallel_for(events.size(), threads, [&](std::size_t i) {
    const Label label = i < n_signal ? Label::signal : Label::background;
    const std::uint64_t index = i < n_signal ? i : i - n_signal;
    events[i] = simulate_event(root.substream(event_stream(label, index)), label, config, geometry);
  });
  auto normalize_range = [&](std::size_t begin, std::size_t end, double total) {
    double sum = 0;
    for (std::size_t i = begin; i < end; ++i) sum += events[i].weight;
    for (std::size_t i = begin; i < end; ++i) events[i].weight *= total / sum;
  };
  if (n_signal) normalize_range(0, n_signal, config.signal.events_per_year);
  if (n_background) normalize_range(n_signal, events.size(), config.background.events_per_year);
  return events;
}

}  // namespace icegraph
