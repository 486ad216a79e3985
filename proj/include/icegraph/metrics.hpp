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
 * @file metrics.hpp
 * @brief Weighted ROC, AUC and the fixed signal-to-noise operating point.
 *
 * An event is selected at threshold tau when score >= tau. Rates are sums of
 * event weights (events/year), so a selection's signal and background are
 * directly the expected annual counts.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "icegraph/error.hpp"
#include "icegraph/event.hpp"
#include "icegraph/text.hpp"

namespace icegraph {

struct ScoredEvent {
  double score = 0;
  Label label = Label::background;
  double weight = 1;
};

struct RocPoint {
  double threshold = 0;
  double tpr = 0;
  double fpr = 0;
};

/// Weighted selection at one threshold.
struct OperatingPoint {
  double threshold = HUGE_VAL;
  double signal = 0;      // events/year
  double background = 0;  // events/year
  double snr = HUGE_VAL;  // +inf when background == 0
  bool feasible = false;
};

inline double signal_to_noise(double signal, double background) {
  return background > 0 ? signal / background : HUGE_VAL;
}

/// True when `a` is a strictly better choice than `b` under the rules:
/// feasible beats infeasible; among feasible, more signal then higher snr;
/// among infeasible, higher snr then more signal. Equal candidates keep the
/// earlier one.
inline bool better_operating_point(const OperatingPoint& a, const OperatingPoint& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) {
    if (a.signal != b.signal) return a.signal > b.signal;
    return a.snr > b.snr;
  }
  if (a.snr != b.snr) return a.snr > b.snr;
  return a.signal > b.signal;
}

namespace detail {

struct ClassTotals {
  double signal = 0;
  double background = 0;
};

inline ClassTotals class_totals(const std::vector<ScoredEvent>& scored) {
  ClassTotals t;
  for (const auto& s : scored) (s.label == Label::signal ? t.signal : t.background) += s.weight;
  return t;
}

/// Indices sorted by descending score; equal scores keep input order.
inline std::vector<std::size_t> descending_order(const std::vector<ScoredEvent>& scored) {
  std::vector<std::size_t> idx(scored.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scored[a].score > scored[b].score; });
  return idx;
}

/// Calls fn(threshold, signal, background) for every distinct score, from
/// the highest threshold down, with the cumulative selected weights.
template <class Fn>
void scan_thresholds(const std::vector<ScoredEvent>& scored, Fn&& fn) {
  const auto idx = descending_order(scored);
  double sig = 0, bkg = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& s = scored[idx[k]];
    (s.label == Label::signal ? sig : bkg) += s.weight;
    if (k + 1 == idx.size() || scored[idx[k + 1]].score != s.score) fn(s.score, sig, bkg);
  }
}

inline void check_scored(const std::vector<ScoredEvent>& scored) {
  for (const auto& s : scored) {
    if (!(s.weight >= 0) || !std::isfinite(s.weight)) throw ValidationError("scored event weights must be finite and >= 0");
    if (std::isnan(s.score)) throw ValidationError("scored event has a NaN score");
  }
}

}  // namespace detail

/// ROC points in order of decreasing threshold, starting at (+inf, 0, 0) and
/// ending at the lowest score, where (fpr, tpr) = (1, 1).
inline std::vector<RocPoint> weighted_roc(const std::vector<ScoredEvent>& scored) {
  detail::check_scored(scored);
  const auto totals = detail::class_totals(scored);
  if (!(totals.signal > 0) || !(totals.background > 0))
    throw ValidationError("weighted ROC needs positive weight in both classes");
  // Normalize by the final cumulative sums, accumulated in the same order,
  // so the rates never exceed 1 by rounding.
  std::vector<RocPoint> roc{{HUGE_VAL, 0.0, 0.0}};
  detail::scan_thresholds(scored, [&](double tau, double sig, double bkg) { roc.push_back({tau, sig, bkg}); });
  const double sig_total = roc.back().tpr, bkg_total = roc.back().fpr;
  for (auto& p : roc) {
    p.tpr /= sig_total;
    p.fpr /= bkg_total;
  }
  return roc;
}

/// Trapezoidal area under TPR(FPR).
inline double auc(const std::vector<RocPoint>& roc) {
  double area = 0;
  for (std::size_t k = 1; k < roc.size(); ++k) area += (roc[k].fpr - roc[k - 1].fpr) * (roc[k].tpr + roc[k - 1].tpr) * 0.5;
  return area;
}

/// Selection at `threshold` (score >= threshold).
inline OperatingPoint selection_at(const std::vector<ScoredEvent>& scored, double threshold, double target_snr) {
  OperatingPoint op;
  op.threshold = threshold;
  for (const auto& s : scored)
    if (s.score >= threshold) (s.label == Label::signal ? op.signal : op.background) += s.weight;
  op.snr = signal_to_noise(op.signal, op.background);
  op.feasible = op.snr >= target_snr;
  return op;
}

/// Threshold that maximizes selected signal subject to snr >= target_snr.
///
/// Candidates are the distinct observed scores (each selects at least one
/// event). When none is feasible the maximal-snr candidate is returned with
/// feasible = false.
inline OperatingPoint operating_point(const std::vector<ScoredEvent>& scored, double target_snr = 1.0) {
  if (scored.empty()) throw ValidationError("operating point of an empty event set");
  detail::check_scored(scored);
  if (std::none_of(scored.begin(), scored.end(), [](const ScoredEvent& s) { return s.label == Label::signal; }))
    throw ValidationError("operating point needs at least one signal event");
  OperatingPoint best;
  bool have = false;
  detail::scan_thresholds(scored, [&](double tau, double sig, double bkg) {
    OperatingPoint op{tau, sig, bkg, signal_to_noise(sig, bkg), false};
    op.feasible = op.snr >= target_snr;
    if (!have || better_operating_point(op, best)) {
      best = op;
      have = true;
    }
  });
  return best;
}

struct EvalReport {
  std::vector<RocPoint> roc;
  double auc = 0;
  OperatingPoint operating;
  double target_snr = 1.0;
  double total_signal = 0;
  double total_background = 0;
  std::size_t n_signal = 0;
  std::size_t n_background = 0;
};

inline EvalReport make_report(const std::vector<ScoredEvent>& scored, double target_snr = 1.0) {
  EvalReport r;
  r.roc = weighted_roc(scored);
  r.auc = auc(r.roc);
  r.operating = operating_point(scored, target_snr);
  r.target_snr = target_snr;
  for (const auto& s : scored) {
    if (s.label == Label::signal) {
      r.total_signal += s.weight;
      ++r.n_signal;
    } else {
      r.total_background += s.weight;
      ++r.n_background;
    }
  }
  return r;
}

/// `threshold,fpr,tpr` CSV, one row per ROC point.
inline std::string roc_csv(const std::vector<RocPoint>& roc) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : roc)
    out += text::format_double(p.threshold) + "," + text::format_double(p.fpr) + "," + text::format_double(p.tpr) + "\n";
  return out;
}

/// Flat key=value summary of a report.
inline text::KeyValues report_summary(const EvalReport& r) {
  using text::format_double;
  return {
      {"auc", format_double(r.auc)},
      {"threshold", format_double(r.operating.threshold)},
      {"signal_per_year", format_double(r.operating.signal)},
      {"background_per_year", format_double(r.operating.background)},
      {"snr", format_double(r.operating.snr)},
      {"feasible", r.operating.feasible ? "true" : "false"},
      {"target_snr", format_double(r.target_snr)},
      {"total_signal_per_year", format_double(r.total_signal)},
      {"total_background_per_year", format_double(r.total_background)},
      {"n_signal", std::to_string(r.n_signal)},
      {"n_background", std::to_string(r.n_background)},
  };
}

}  // namespace icegraph
