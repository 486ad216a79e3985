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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "icegraph/metrics.hpp"

using namespace icegraph;

namespace {

constexpr Label S = Label::signal;
constexpr Label B = Label::background;

struct Sums {
  double sig = 0, bkg = 0;
};

Sums selected(const std::vector<ScoredEvent>& ev, double tau) {
  Sums s;
  for (const auto& e : ev)
    if (e.score >= tau) (e.label == S ? s.sig : s.bkg) += e.weight;
  return s;
}

// Exhaustive search over distinct scores, written independently of the library.
OperatingPoint brute_force_operating_point(const std::vector<ScoredEvent>& ev, double target) {
  std::set<double> taus;
  for (const auto& e : ev) taus.insert(e.score);
  bool have_feasible = false;
  double best_tau = 0, best_sig = -1, best_snr = -1;
  for (double tau : taus) {
    const auto s = selected(ev, tau);
    const double snr = s.bkg > 0 ? s.sig / s.bkg : HUGE_VAL;
    if (snr < target) continue;
    if (!have_feasible || s.sig > best_sig || (s.sig == best_sig && snr > best_snr) ||
        (s.sig == best_sig && snr == best_snr && tau > best_tau)) {
      have_feasible = true;
      best_tau = tau;
      best_sig = s.sig;
      best_snr = snr;
    }
  }
  if (!have_feasible) {
    for (double tau : taus) {
      const auto s = selected(ev, tau);
      const double snr = s.bkg > 0 ? s.sig / s.bkg : HUGE_VAL;
      if (snr > best_snr || (snr == best_snr && s.sig > best_sig) || (snr == best_snr && s.sig == best_sig && tau > best_tau)) {
        best_tau = tau;
        best_sig = s.sig;
        best_snr = snr;
      }
    }
  }
  const auto s = selected(ev, best_tau);
  return {best_tau, s.sig, s.bkg, best_snr, have_feasible};
}

std::vector<ScoredEvent> random_scored(std::mt19937_64& rng, int n, int score_levels, double shift) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> level(0, score_levels - 1);
  std::vector<ScoredEvent> ev;
  for (int i = 0; i < n; ++i) {
    const Label y = (i % 3 == 0) ? S : B;
    double s = (level(rng) + 0.5) / score_levels;
    if (y == S) s = std::min(1.0, s + shift * u(rng));
    ev.push_back({s, y, std::exp(4 * u(rng) - 2)});
  }
  ev[0].label = S;
  ev[1].label = B;
  return ev;
}

}  // namespace

TEST(WeightedRoc, HandCaseMatchesEnumeration) {
  // Signal weights {1,1,2}, background weights {1,1,2}.
  const std::vector<ScoredEvent> ev = {{0.9, S, 1}, {0.8, B, 1}, {0.7, S, 2}, {0.6, B, 2}, {0.5, S, 1}, {0.4, B, 1}};
  const auto roc = weighted_roc(ev);
  ASSERT_EQ(roc.size(), 7u);
  EXPECT_EQ(roc.front().tpr, 0.0);
  EXPECT_EQ(roc.front().fpr, 0.0);
  for (std::size_t k = 1; k < roc.size(); ++k) {
    const auto s = selected(ev, roc[k].threshold);
    EXPECT_DOUBLE_EQ(roc[k].tpr, s.sig / 4.0);
    EXPECT_DOUBLE_EQ(roc[k].fpr, s.bkg / 4.0);
  }
  EXPECT_EQ(roc.back().tpr, 1.0);
  EXPECT_EQ(roc.back().fpr, 1.0);
  // Points (0,0) (0,.25) (.25,.25) (.25,.75) (.75,.75) (.75,1) (1,1).
  const double expected = 0.25 * 0.25 + 0.5 * 0.75 + 0.25 * 1.0;
  EXPECT_DOUBLE_EQ(auc(roc), expected);
}

TEST(WeightedRoc, PerfectAndInvertedAndChance) {
  std::vector<ScoredEvent> ev;
  for (int i = 0; i < 50; ++i) {
    ev.push_back({0.6 + i * 0.001, S, 1.0 + i});
    ev.push_back({0.1 + i * 0.001, B, 2.0});
  }
  auto roc = weighted_roc(ev);
  EXPECT_DOUBLE_EQ(auc(roc), 1.0);
  EXPECT_TRUE(std::any_of(roc.begin(), roc.end(), [](const RocPoint& p) { return p.fpr == 0 && p.tpr == 1; }));
  for (auto& e : ev) e.score = 1 - e.score;
  EXPECT_DOUBLE_EQ(auc(weighted_roc(ev)), 0.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ScoredEvent> chance;
  for (int i = 0; i < 20000; ++i) chance.push_back({u(rng), u(rng) < 0.5 ? S : B, 1.0});
  EXPECT_NEAR(auc(weighted_roc(chance)), 0.5, 0.05);
}

TEST(WeightedRoc, MonotoneAndTransformInvariant) {
  std::mt19937_64 rng(6);
  const auto ev = random_scored(rng, 500, 40, 0.4);
  const auto roc = weighted_roc(ev);
  for (std::size_t k = 1; k < roc.size(); ++k) {
    EXPECT_LT(roc[k].threshold, roc[k - 1].threshold);
    EXPECT_GE(roc[k].tpr, roc[k - 1].tpr);
    EXPECT_GE(roc[k].fpr, roc[k - 1].fpr);
    EXPECT_LE(roc[k].tpr, 1.0);
    EXPECT_LE(roc[k].fpr, 1.0);
  }
  auto transformed = ev;
  for (auto& e : transformed) e.score = std::log(e.score) * 3 + 7;
  EXPECT_DOUBLE_EQ(auc(weighted_roc(transformed)), auc(roc));
}

TEST(WeightedRoc, RejectsSingleClassAndBadWeights) {
  EXPECT_THROW(weighted_roc({{0.5, S, 1}, {0.4, S, 1}}), ValidationError);
  EXPECT_THROW(weighted_roc({{0.5, B, 1}}), ValidationError);
  EXPECT_THROW(weighted_roc({{0.5, S, 1}, {0.4, B, -1}}), ValidationError);
  EXPECT_THROW(weighted_roc({{std::nan(""), S, 1}, {0.4, B, 1}}), ValidationError);
}

TEST(OperatingPoint, ZeroBackgroundIsFeasible) {
  const std::vector<ScoredEvent> ev = {{0.9, S, 3}, {0.8, S, 1}, {0.7, B, 10}, {0.6, S, 1}};
  const auto op = operating_point(ev, 1.0);
  EXPECT_TRUE(op.feasible);
  EXPECT_EQ(op.threshold, 0.8);
  EXPECT_EQ(op.signal, 4.0);
  EXPECT_EQ(op.background, 0.0);
  EXPECT_TRUE(std::isinf(op.snr));
}

TEST(OperatingPoint, HandCaseMatchesBruteForce) {
  const std::vector<ScoredEvent> ev = {{0.95, S, 1}, {0.9, B, 0.5}, {0.85, S, 2}, {0.7, B, 2},
                                       {0.6, S, 1},  {0.5, B, 1},   {0.4, S, 3},  {0.2, B, 4}};
  const auto op = operating_point(ev, 1.0);
  const auto bf = brute_force_operating_point(ev, 1.0);
  EXPECT_EQ(op.threshold, bf.threshold);
  EXPECT_EQ(op.signal, bf.signal);
  EXPECT_EQ(op.background, bf.background);
  // Cumulative at 0.4: signal 7, background 3.5.
  EXPECT_EQ(op.threshold, 0.4);
  EXPECT_TRUE(op.feasible);
}

TEST(OperatingPoint, InfeasibleReturnsMaxSnr) {
  const std::vector<ScoredEvent> ev = {{0.9, B, 5}, {0.8, S, 1}, {0.7, B, 1}, {0.6, S, 1}, {0.5, B, 10}};
  const auto op = operating_point(ev, 1.0);
  EXPECT_FALSE(op.feasible);
  const auto bf = brute_force_operating_point(ev, 1.0);
  EXPECT_EQ(op.threshold, bf.threshold);
  EXPECT_DOUBLE_EQ(op.snr, 2.0 / 6.0);
}

TEST(OperatingPoint, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 300);
    const auto ev = random_scored(rng, n, 1 + static_cast<int>(rng() % 50), (trial % 4) * 0.2);
    for (double target : {0.5, 1.0, 3.0}) {
      const auto op = operating_point(ev, target);
      const auto bf = brute_force_operating_point(ev, target);
      ASSERT_EQ(op.threshold, bf.threshold) << "trial " << trial << " target " << target;
      ASSERT_EQ(op.feasible, bf.feasible);
      EXPECT_NEAR(op.signal, bf.signal, 1e-9 * bf.signal);
      EXPECT_NEAR(op.background, bf.background, 1e-9 * std::max(1.0, bf.background));
    }
  }
  const auto big = random_scored(rng, 10000, 2000, 0.3);
  EXPECT_EQ(operating_point(big, 1.0).threshold, brute_force_operating_point(big, 1.0).threshold);
}

TEST(OperatingPoint, WeightScaling) {
  std::mt19937_64 rng(8);
  const auto ev = random_scored(rng, 400, 30, 0.5);
  auto scaled = ev;
  for (auto& e : scaled) e.weight *= 10;
  const auto a = operating_point(ev, 1.0), b = operating_point(scaled, 1.0);
  EXPECT_EQ(a.threshold, b.threshold);
  EXPECT_NEAR(b.signal, 10 * a.signal, 1e-9 * b.signal);
  EXPECT_NEAR(b.background, 10 * a.background, 1e-9 * std::max(1.0, b.background));
  EXPECT_NEAR(a.snr, b.snr, 1e-12 * a.snr);

  auto doubled = ev;
  for (auto& e : doubled) e.weight *= 2;
  const auto r1 = weighted_roc(ev), r2 = weighted_roc(doubled);
  ASSERT_EQ(r1.size(), r2.size());
  for (std::size_t k = 0; k < r1.size(); ++k) {
    EXPECT_EQ(r1[k].threshold, r2[k].threshold);
    EXPECT_NEAR(r1[k].tpr, r2[k].tpr, 1e-14);
    EXPECT_NEAR(r1[k].fpr, r2[k].fpr, 1e-14);
  }
}

TEST(OperatingPoint, Errors) {
  EXPECT_THROW(operating_point({}, 1.0), ValidationError);
  EXPECT_THROW(operating_point({{0.4, B, 1}}, 1.0), ValidationError);
}

TEST(Report, SummaryAndCsv) {
  const std::vector<ScoredEvent> ev = {{0.9, S, 1}, {0.8, B, 1}, {0.7, S, 2}, {0.6, B, 2}};
  const auto r = make_report(ev, 1.0);
  EXPECT_EQ(r.n_signal, 2u);
  EXPECT_EQ(r.n_background, 2u);
  EXPECT_EQ(r.total_signal, 3.0);
  EXPECT_EQ(r.total_background, 3.0);
  const auto kv = report_summary(r);
  EXPECT_EQ(kv.at("feasible"), "true");
  EXPECT_EQ(kv.at("signal_per_year"), "3");
  const auto csv = roc_csv(r.roc);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "threshold,fpr,tpr");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(r.roc.size() + 1));
  EXPECT_EQ(roc_csv(make_report(ev, 1.0).roc), csv);
}
