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
 * @file baseline.hpp
 * @brief Stochasticity cuts: the non-learned reference selection.
 *
 * Hit charge is apportioned to fixed-length segments along the track. Two
 * statistics measure how clumpy the profile is: the sum of squared residuals
 * of a straight-line fit on 120 m segments, and the largest 50 m segment
 * divided by the mean segment. An event is kept when both pass a threshold.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "icegraph/error.hpp"
#include "icegraph/event.hpp"
#include "icegraph/geometry.hpp"
#include "icegraph/metrics.hpp"
#include "icegraph/parallel.hpp"
#include "icegraph/simulator.hpp"
#include "icegraph/text.hpp"

namespace icegraph {

struct SegmentProfile {
  double segment_length = 0;
  std::vector<double> centers;  // arc length along the track, meters
  std::vector<double> light;    // photoelectrons

  std::size_t size() const noexcept { return light.size(); }
};

enum class PeakStatistic { mean, median };

struct BaselineSettings {
  double chi2_segment_length = 120.0;
  double peak_segment_length = 50.0;
  PeakStatistic peak_statistic = PeakStatistic::mean;
  double volume_padding = 50.0;  // m; fallback box for tracks that miss the instrumented one
};

struct BaselineCuts {
  double chi2_min = -HUGE_VAL;
  double pm_min = -HUGE_VAL;
  BaselineSettings settings;
};

/// Index of the nearest center in arc length; ties go to the lower index.
inline std::size_t nearest_segment(const std::vector<double>& centers, double s) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < centers.size(); ++k)
    if (std::abs(s - centers[k]) < std::abs(s - centers[best])) best = k;
  return best;
}

/// Accumulates each hit's q_total into the segment nearest its projection on
/// the track. Segments tile the track's passage through the instrumented
/// box; the tiling is centered on it, so every segment has full length.
/// At least `min_segments` segments are laid out. `padding` inflates the box.
inline SegmentProfile apportion_light(const Event& event, const Track& track, double segment_length,
                                      const DetectorGeometry& geometry, std::size_t min_segments = 1,
                                      double padding = 0.0) {
  if (!(segment_length > 0)) throw DomainError("segment length must be > 0");
  if (event.hits.empty()) throw ValidationError("cannot apportion light of an event without hits");
  const double norm = track.direction.norm();
  if (!(norm > 0) || !track.direction.allFinite() || !track.anchor.allFinite()) throw ValidationError("invalid track");
  const Vec3 dir = track.direction / norm;
  const auto span = intersect_box(track.anchor, dir, geometry.bounding_box().inflated(padding));
  if (!span) throw ValidationError("track misses the instrumented volume");

  const double length = span->second - span->first;
  const auto n = std::max<std::size_t>(min_segments, static_cast<std::size_t>(std::max(1.0, std::ceil(length / segment_length))));
  const double start = span->first - 0.5 * (static_cast<double>(n) * segment_length - length);

  SegmentProfile p;
  p.segment_length = segment_length;
  p.centers.resize(n);
  p.light.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) p.centers[k] = start + (static_cast<double>(k) + 0.5) * segment_length;

  for (const auto& h : event.hits) {
    const double s = (geometry.position(h.dom_id) - track.anchor).dot(dir);
    // Uniform spacing: the nearest center is within one slot of floor().
    const double slot = std::floor((s - start) / segment_length);
    const auto k0 = static_cast<std::ptrdiff_t>(std::clamp(slot, 0.0, static_cast<double>(n - 1)));
    std::size_t best = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, k0 - 1));
    for (auto k = best + 1; k <= std::min<std::size_t>(n - 1, static_cast<std::size_t>(k0 + 1)); ++k)
      if (std::abs(s - p.centers[k]) < std::abs(s - p.centers[best])) best = k;
    p.light[best] += h.q_total;
  }
  return p;
}

/// Sum of squared residuals of the least-squares line light(center).
inline double pseudo_chi2(const SegmentProfile& p) {
  if (p.size() < 2) throw DomainError("pseudo-chi2 needs at least 2 segments");
  const auto n = static_cast<double>(p.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    mx += p.centers[k];
    my += p.light[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    sxx += (p.centers[k] - mx) * (p.centers[k] - mx);
    sxy += (p.centers[k] - mx) * (p.light[k] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  double ssr = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double r = p.light[k] - (my + slope * (p.centers[k] - mx));
    ssr += r * r;
  }
  return ssr;
}

/// Largest segment divided by the mean (or median) over all segments.
inline double peak_mean_ratio(const SegmentProfile& p, PeakStatistic stat = PeakStatistic::mean) {
  if (p.light.empty()) throw DomainError("peak/mean ratio of an empty profile");
  const double peak = *std::max_element(p.light.begin(), p.light.end());
  if (!(peak > 0)) throw DomainError("peak/mean ratio of an all-zero profile");
  if (stat == PeakStatistic::mean) {
    double sum = 0;
    for (double v : p.light) sum += v;
    return peak / (sum / static_cast<double>(p.light.size()));
  }
  auto v = p.light;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double median = v[mid];
  if (v.size() % 2 == 0) median = 0.5 * (median + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return median > 0 ? peak / median : HUGE_VAL;
}

struct BaselineStats {
  double chi2 = 0;
  double peak_mean = 1;
};

/// Both statistics on the event's truth track. A track that only clips the
/// padded volume (light can be emitted there) is segmented over the padded box.
inline BaselineStats baseline_statistics(const Event& event, const DetectorGeometry& geometry, const BaselineSettings& s = {}) {
  const Vec3 dir = event.truth.direction.normalized();
  const double padding = intersect_box(event.truth.anchor, dir, geometry.bounding_box()) ? 0.0 : s.volume_padding;
  BaselineStats st;
  st.chi2 = pseudo_chi2(apportion_light(event, event.truth, s.chi2_segment_length, geometry, 2, padding));
  st.peak_mean = peak_mean_ratio(apportion_light(event, event.truth, s.peak_segment_length, geometry, 1, padding), s.peak_statistic);
  return st;
}

inline bool passes(const BaselineStats& st, const BaselineCuts& cuts) {
  return st.chi2 >= cuts.chi2_min && st.peak_mean >= cuts.pm_min;
}

inline Label baseline_classify(const Event& event, const BaselineCuts& cuts, const DetectorGeometry& geometry) {
  return passes(baseline_statistics(event, geometry, cuts.settings), cuts) ? Label::signal : Label::background;
}

/// One-dimensional score that is >= 0 exactly when the event passes the cuts.
inline double baseline_score(const BaselineStats& st, const BaselineCuts& cuts) {
  auto margin = [](double v, double cut) {
    if (cut == -HUGE_VAL) return HUGE_VAL;
    if (cut == HUGE_VAL) return -HUGE_VAL;
    return std::asinh(v) - std::asinh(cut);
  };
  return std::min(margin(st.chi2, cuts.chi2_min), margin(st.peak_mean, cuts.pm_min));
}

// ---------------------------------------------------------------------------
// Tuning

/// `count` candidate cut values: the empirical quantiles k / count.
inline std::vector<double> quantile_grid(std::vector<double> values, std::size_t count) {
  if (values.empty() || count == 0) return {};
  std::sort(values.begin(), values.end());
  std::vector<double> grid;
  for (std::size_t k = 0; k < count; ++k) grid.push_back(values[k * values.size() / count]);
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

struct TunedCuts {
  BaselineCuts cuts;
  OperatingPoint selection;  // threshold field unused
};

/// Weighted selection of events whose statistics pass `cuts`.
inline OperatingPoint cut_selection(const std::vector<BaselineStats>& stats, const std::vector<Event>& events,
                                    const BaselineCuts& cuts, double target_snr) {
  OperatingPoint op;
  op.threshold = 0;
  for (std::size_t i = 0; i < events.size(); ++i)
    if (passes(stats[i], cuts)) (events[i].is_signal() ? op.signal : op.background) += events[i].weight;
  op.snr = signal_to_noise(op.signal, op.background);
  op.feasible = op.snr >= target_snr;
  return op;
}

/// Grid search over (chi2_min, pm_min) on quantile grids of both statistics,
/// maximizing selected signal subject to snr >= target_snr with the same
/// tie and infeasibility rules as operating_point().
inline TunedCuts tune_cuts(const std::vector<Event>& events, const std::vector<BaselineStats>& stats, double target_snr = 1.0,
                           std::size_t grid_size = 50, const BaselineSettings& settings = {}) {
  if (events.size() != stats.size()) throw DimensionError("one statistics record per event required");
  const bool has_sig = std::any_of(events.begin(), events.end(), [](const Event& e) { return e.is_signal(); });
  const bool has_bkg = std::any_of(events.begin(), events.end(), [](const Event& e) { return !e.is_signal(); });
  if (!has_sig || !has_bkg) throw ValidationError("cut tuning needs both signal and background events");

  std::vector<double> chi2, pm;
  for (const auto& s : stats) {
    chi2.push_back(s.chi2);
    pm.push_back(s.peak_mean);
  }
  const auto chi2_grid = quantile_grid(chi2, grid_size);
  const auto pm_grid = quantile_grid(pm, grid_size);

  TunedCuts best;
  bool have = false;
  for (double c : chi2_grid) {
    for (double p : pm_grid) {
      BaselineCuts cuts{c, p, settings};
      const auto op = cut_selection(stats, events, cuts, target_snr);
      if (!have || better_operating_point(op, best.selection)) {
        best = {cuts, op};
        have = true;
      }
    }
  }
  return best;
}

inline std::vector<BaselineStats> baseline_statistics(const std::vector<Event>& events, const DetectorGeometry& geometry,
                                                      const BaselineSettings& s = {}, unsigned threads = 1) {
  std::vector<BaselineStats> out(events.size());
  parallel_for(events.size(), threads, [&](std::size_t i) { out[i] = baseline_statistics(events[i], geometry, s); });
  return out;
}

inline TunedCuts tune_cuts(const std::vector<Event>& events, const DetectorGeometry& geometry, double target_snr = 1.0,
                           std::size_t grid_size = 50, const BaselineSettings& settings = {}) {
  return tune_cuts(events, baseline_statistics(events, geometry, settings), target_snr, grid_size, settings);
}

/// Report for fixed cuts: ROC and AUC of baseline_score, operating point =
/// the events passing the cuts.
inline EvalReport baseline_report(const std::vector<Event>& events, const std::vector<BaselineStats>& stats,
                                  const BaselineCuts& cuts, double target_snr = 1.0) {
  if (events.size() != stats.size()) throw DimensionError("one statistics record per event required");
  std::vector<ScoredEvent> scored;
  scored.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) scored.push_back({baseline_score(stats[i], cuts), events[i].label, events[i].weight});
  auto r = make_report(scored, target_snr);
  r.operating = cut_selection(stats, events, cuts, target_snr);
  return r;
}

// ---------------------------------------------------------------------------
// Cuts file: flat key=value.

inline std::string serialize_cuts(const BaselineCuts& c) {
  return text::format_key_values({
      {"chi2_min", text::format_double(c.chi2_min)},
      {"pm_min", text::format_double(c.pm_min)},
      {"chi2_segment_length", text::format_double(c.settings.chi2_segment_length)},
      {"peak_segment_length", text::format_double(c.settings.peak_segment_length)},
      {"peak_statistic", c.settings.peak_statistic == PeakStatistic::mean ? "mean" : "median"},
      {"volume_padding", text::format_double(c.settings.volume_padding)},
  });
}

inline BaselineCuts parse_cuts(std::string_view content) {
  const auto kv = text::parse_key_values(content);
  BaselineCuts c;
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("cuts file is missing '") + key + "'");
    return it->second;
  };
  c.chi2_min = text::parse_double(get("chi2_min"));
  c.pm_min = text::parse_double(get("pm_min"));
  if (kv.count("chi2_segment_length")) c.settings.chi2_segment_length = text::parse_double(get("chi2_segment_length"));
  if (kv.count("peak_segment_length")) c.settings.peak_segment_length = text::parse_double(get("peak_segment_length"));
  if (kv.count("volume_padding")) c.settings.volume_padding = text::parse_double(get("volume_padding"));
  if (kv.count("peak_statistic")) {
    const auto& s = get("peak_statistic");
    if (s == "mean") c.settings.peak_statistic = PeakStatistic::mean;
    else if (s == "median") c.settings.peak_statistic = PeakStatistic::median;
    else throw ParseError("peak_statistic must be 'mean' or 'median'");
  }
  if (std::isnan(c.chi2_min) || std::isnan(c.pm_min)) throw ValidationError("cut thresholds must not be NaN");
  return c;
}

}  // namespace icegraph
