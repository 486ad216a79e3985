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
#include <numeric>
#include <random>

#include "icegraph/graph.hpp"
#include "test_util.hpp"

using namespace icegraph;

namespace {

// Scalar-loop oracles.
double kernel_oracle(const Matrix& p, int i, int j, double sigma) {
  double r2 = 0;
  for (int k = 0; k < 3; ++k) r2 += (p(i, k) - p(j, k)) * (p(i, k) - p(j, k));
  return std::exp(-0.5 * r2 / (sigma * sigma));
}

Matrix softmax_oracle(const Matrix& d) {
  Matrix a(d.rows(), d.cols());
  for (int i = 0; i < d.rows(); ++i) {
    double z = 0;
    for (int j = 0; j < d.cols(); ++j) z += std::exp(d(i, j));
    for (int j = 0; j < d.cols(); ++j) a(i, j) = std::exp(d(i, j)) / z;
  }
  return a;
}

double max_rel_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST(Kernel, DiagonalAndSymmetry) {
  std::mt19937_64 rng(1);
  const auto p = testutil::random_positions(rng, 12);
  const auto k = kernel_matrix(p, 80.0);
  for (int i = 0; i < 12; ++i) {
    EXPECT_EQ(k(i, i), 1.0);
    for (int j = 0; j < 12; ++j) EXPECT_EQ(k(i, j), k(j, i));
  }
}

TEST(Kernel, DistanceSigmaRootTwo) {
  const double sigma = 37.0;
  Matrix p(2, 3);
  p << 0, 0, 0, sigma * std::sqrt(2.0), 0, 0;
  EXPECT_NEAR(kernel_matrix(p, sigma)(0, 1), std::exp(-1.0), 1e-15);
}

TEST(Kernel, CollinearMatchesScalarOracle) {
  Matrix p(3, 3);
  p << 0, 0, 0, 100, 0, 0, 200, 0, 0;
  const auto k = kernel_matrix(p, 100.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(k(i, j), kernel_oracle(p, i, j, 100.0), 1e-12);
  EXPECT_NEAR(k(0, 2), std::exp(-2.0), 1e-12);
}

TEST(Kernel, NonPositiveSigmaIsDomainError) {
  Matrix p = Matrix::Zero(2, 3);
  EXPECT_THROW(kernel_matrix(p, 0.0), DomainError);
  EXPECT_THROW(kernel_matrix(p, -1.0), DomainError);
  EXPECT_THROW(adjacency_grad_sigma(p, 0.0), DomainError);
  EXPECT_THROW(kernel_matrix(p, std::nan("")), DomainError);
}

TEST(Adjacency, SingleVertex) {
  Matrix p = Matrix::Zero(1, 3);
  const auto a = adjacency(kernel_matrix(p, 125.0));
  ASSERT_EQ(a.rows(), 1);
  EXPECT_EQ(a(0, 0), 1.0);
}

TEST(Adjacency, CoincidentPairIsHalf) {
  Matrix p = Matrix::Zero(2, 3);
  const auto a = adjacency(kernel_matrix(p, 10.0));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(a(i, j), 0.5);
}

TEST(Adjacency, MatchesSoftmaxOracle) {
  std::mt19937_64 rng(2);
  const auto p = testutil::random_positions(rng, 4);
  const auto k = kernel_matrix(p, 300.0);
  const auto a = adjacency(k);
  const auto o = softmax_oracle(k);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-12);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(a(i, j), o(i, j), 1e-12);
  }
}

TEST(Adjacency, RowStochasticAndPositive) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> n_dist(1, 80);
  std::uniform_real_distribution<double> log_sigma(0.0, 7.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = testutil::random_positions(rng, n_dist(rng));
    const auto a = adjacency(kernel_matrix(p, std::exp(log_sigma(rng))));
    for (int i = 0; i < a.rows(); ++i) {
      ASSERT_NEAR(a.row(i).sum(), 1.0, 1e-9);
      for (int j = 0; j < a.cols(); ++j) {
        ASSERT_GT(a(i, j), 0.0);
        ASSERT_LE(a(i, j), 1.0);
      }
    }
  }
}

TEST(Adjacency, LargeSigmaUniform) {
  std::mt19937_64 rng(4);
  const auto p = testutil::random_positions(rng, 9);
  const auto a = adjacency(kernel_matrix(p, 1e6));
  EXPECT_LT((a.array() - 1.0 / 9).abs().maxCoeff(), 1e-6);
}

TEST(Adjacency, SmallSigmaOneHotSoftmax) {
  std::mt19937_64 rng(5);
  const int n = 6;
  const auto p = testutil::random_positions(rng, n);
  const auto a = adjacency(kernel_matrix(p, 1e-3));
  // Kernel -> identity, so each row -> softmax(e_i) = e / (e + n - 1) on the diagonal.
  const double diag = std::exp(1.0) / (std::exp(1.0) + n - 1);
  const double off = 1.0 / (std::exp(1.0) + n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) EXPECT_NEAR(a(i, j), i == j ? diag : off, 1e-12);
}

TEST(AdjacencyGrad, SingleVertexAndCoincidentAreZero) {
  EXPECT_EQ(adjacency_grad_sigma(Matrix::Zero(1, 3), 50.0)(0, 0), 0.0);
  Matrix p(4, 3);
  p.rowwise() = RowVector::Constant(3, 12.5);
  EXPECT_EQ(adjacency_grad_sigma(p, 50.0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AdjacencyGrad, FiniteDifferences) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> n_dist(2, 50);
  std::uniform_real_distribution<double> sig(40.0, 600.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = trial == 0 ? 5 : n_dist(rng);
    const double sigma = sig(rng);
    const auto p = testutil::random_positions(rng, n, 4 * sigma);
    const double h = 1e-4 * sigma;
    const Matrix fd = (adjacency(kernel_matrix(p, sigma + h)) - adjacency(kernel_matrix(p, sigma - h))) / (2 * h);
    const auto g = adjacency_grad_sigma(p, sigma);
    ASSERT_LT(max_rel_error(g, fd), 1e-5) << "trial " << trial << " n " << n;
  }
}

TEST(Normalizer, FitStandardizes) {
  std::mt19937_64 rng(7);
  std::vector<Event> ev;
  for (int i = 0; i < 20; ++i) ev.push_back(testutil::random_event(rng, 15));
  const auto& g = testutil::standard_geometry();
  const auto norm = FeatureNormalizer::fit(ev, g);
  std::array<double, kFeatureDim> s{}, s2{};
  double count = 0;
  for (const auto& e : ev) {
    const auto in = prepare_graph_inputs(e, g, norm);
    for (int i = 0; i < in.features.rows(); ++i) {
      for (int k = 0; k < kFeatureDim; ++k) {
        s[k] += in.features(i, k);
        s2[k] += in.features(i, k) * in.features(i, k);
      }
      count += 1;
    }
  }
  for (int k = 0; k < kFeatureDim; ++k) {
    EXPECT_NEAR(s[k] / count, 0.0, 1e-9);
    EXPECT_NEAR(s2[k] / count, 1.0, 1e-9);
  }
}

TEST(BuildGraph, SingleHit) {
  std::mt19937_64 rng(8);
  const auto e = testutil::random_event(rng, 1);
  const auto g = build_event_graph(e, testutil::standard_geometry(), 125.0, {});
  ASSERT_EQ(g.size(), 1);
  EXPECT_EQ(g.adjacency(0, 0), 1.0);
}

TEST(BuildGraph, RawFeaturesAndPositions) {
  std::mt19937_64 rng(9);
  const auto e = testutil::random_event(rng, 10);
  const auto& geo = testutil::standard_geometry();
  const auto g = build_event_graph(e, geo, 125.0, {});
  for (int i = 0; i < 10; ++i) {
    const auto& h = e.hits[static_cast<std::size_t>(i)];
    const auto& p = geo.position(h.dom_id);
    EXPECT_EQ(g.positions.row(i), p.transpose());
    EXPECT_EQ(g.features(i, 0), p.x());
    EXPECT_EQ(g.features(i, 3), std::log1p(h.q_first));
    EXPECT_EQ(g.features(i, 4), std::log1p(h.q_total));
    EXPECT_EQ(g.features(i, 5), h.t_first);
    EXPECT_NEAR(g.adjacency.row(i).sum(), 1.0, 1e-9);
  }
}

TEST(BuildGraph, PermutationEquivariance) {
  std::mt19937_64 rng(10);
  auto e = testutil::random_event(rng, 12);
  const auto& geo = testutil::standard_geometry();
  const auto g = build_event_graph(e, geo, 90.0, {});
  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Event pe = e;
  for (int i = 0; i < 12; ++i) pe.hits[static_cast<std::size_t>(i)] = e.hits[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  const auto pg = build_event_graph(pe, geo, 90.0, {});
  for (int i = 0; i < 12; ++i) {
    EXPECT_EQ(pg.features.row(i), g.features.row(perm[static_cast<std::size_t>(i)]));
    for (int j = 0; j < 12; ++j)
      EXPECT_NEAR(pg.adjacency(i, j), g.adjacency(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]), 1e-15);
  }
}

TEST(BuildGraph, UnknownModuleAndEmptyEvent) {
  Event e;
  e.hits.push_back({999999, 1, 1, 0});
  EXPECT_THROW(build_event_graph(e, testutil::standard_geometry(), 125.0, {}), ValidationError);
  EXPECT_THROW(build_event_graph(Event{}, testutil::standard_geometry(), 125.0, {}), ValidationError);
}

TEST(BuildGraph, SetSigmaRecomputes) {
  std::mt19937_64 rng(11);
  const auto e = testutil::random_event(rng, 7);
  auto g = build_event_graph(e, testutil::standard_geometry(), 50.0, {});
  set_sigma(g, 300.0);
  const auto fresh = build_event_graph(e, testutil::standard_geometry(), 300.0, {});
  EXPECT_EQ(g.adjacency, fresh.adjacency);
}
