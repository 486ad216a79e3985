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
 * @file graph.hpp
 * @brief Per-event graph over the hit modules.
 *
 * Kernel d_ij = exp(-|x_i - x_j|^2 / (2 sigma^2)), then a row softmax over
 * the kernel values (self term included) gives the row-stochastic adjacency.
 * Positions stay in meters; only the feature matrix is standardized.
 */

#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <vector>

#include "icegraph/error.hpp"
#include "icegraph/event.hpp"
#include "icegraph/geometry.hpp"
#include "icegraph/text.hpp"

namespace icegraph {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr int kFeatureDim = 6;
inline constexpr double kDefaultSigma = 125.0;

/// Squared pairwise distances of the rows of `positions` (n x 3).
inline Matrix squared_distances(const Matrix& positions) {
  const auto n = positions.rows();
  Matrix r2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r2(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) r2(i, j) = r2(j, i) = (positions.row(i) - positions.row(j)).squaredNorm();
  }
  return r2;
}

inline void require_positive_sigma(double sigma) {
  if (!(sigma > 0) || !std::isfinite(sigma)) throw DomainError("kernel width sigma must be finite and > 0");
}

/// Gaussian kernel exp(-r^2 / (2 sigma^2)) applied to squared distances.
inline Matrix kernel_from_squared(const Matrix& r2, double sigma) {
  require_positive_sigma(sigma);
  const double scale = -0.5 / (sigma * sigma);
  return (r2.array() * scale).exp().matrix();
}

inline Matrix kernel_matrix(const Matrix& positions, double sigma) {
  require_positive_sigma(sigma);
  return kernel_from_squared(squared_distances(positions), sigma);
}

/// Row softmax of the kernel values, self term included.
inline Matrix adjacency(const Matrix& kernel) {
  Matrix a(kernel.rows(), kernel.cols());
  for (Eigen::Index i = 0; i < kernel.rows(); ++i) {
    const double m = kernel.row(i).maxCoeff();
    a.row(i) = (kernel.row(i).array() - m).exp();
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

/// d a_ij / d sigma from precomputed squared distances, kernel and adjacency.
inline Matrix adjacency_grad_sigma(const Matrix& r2, const Matrix& kernel, const Matrix& adj, double sigma) {
  require_positive_sigma(sigma);
  // d d_ij / d sigma = d_ij * r_ij^2 / sigma^3
  const Matrix dk = (kernel.array() * r2.array() / (sigma * sigma * sigma)).matrix();
  Matrix g(adj.rows(), adj.cols());
  for (Eigen::Index i = 0; i < adj.rows(); ++i) {
    const double mean = adj.row(i).dot(dk.row(i));
    g.row(i) = (adj.row(i).array() * (dk.row(i).array() - mean)).matrix();
  }
  return g;
}

inline Matrix adjacency_grad_sigma(const Matrix& positions, double sigma) {
  require_positive_sigma(sigma);
  const Matrix r2 = squared_distances(positions);
  const Matrix k = kernel_from_squared(r2, sigma);
  return adjacency_grad_sigma(r2, k, adjacency(k), sigma);
}

// ---------------------------------------------------------------------------
// Features

/// Raw per-hit features before standardization: x, y, z, log1p(q_first), log1p(q_total), t_first.
inline std::array<double, kFeatureDim> raw_features(const Hit& h, const Vec3& p) {
  return {p.x(), p.y(), p.z(), std::log1p(h.q_first), std::log1p(h.q_total), h.t_first};
}

/// Per-column affine standardization fitted on training hits.
struct FeatureNormalizer {
  std::array<double, kFeatureDim> mean{};
  std::array<double, kFeatureDim> scale{1, 1, 1, 1, 1, 1};

  bool operator==(const FeatureNormalizer&) const = default;

  static FeatureNormalizer fit(const std::vector<Event>& events, const DetectorGeometry& geometry) {
    std::array<double, kFeatureDim> sum{}, sum2{};
    double count = 0;
    for (const auto& e : events) {
      for (const auto& h : e.hits) {
        const auto f = raw_features(h, geometry.position(h.dom_id));
        for (int k = 0; k < kFeatureDim; ++k) {
          sum[k] += f[k];
          sum2[k] += f[k] * f[k];
        }
        count += 1;
      }
    }
    FeatureNormalizer n;
    if (count == 0) return n;
    for (int k = 0; k < kFeatureDim; ++k) {
      n.mean[k] = sum[k] / count;
      const double var = std::max(0.0, sum2[k] / count - n.mean[k] * n.mean[k]);
      n.scale[k] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return n;
  }
};

struct EventGraph {
  Matrix features;   // n x 6, standardized
  Matrix positions;  // n x 3, meters
  Matrix sq_dist;    // n x n
  Matrix kernel;     // n x n
  Matrix adjacency;  // n x n, row-stochastic
  double sigma = kDefaultSigma;

  Eigen::Index size() const noexcept { return features.rows(); }
};

/// Recomputes kernel and adjacency for a new sigma; features are untouched.
inline void set_sigma(EventGraph& g, double sigma) {
  g.kernel = kernel_from_squared(g.sq_dist, sigma);
  g.adjacency = adjacency(g.kernel);
  g.sigma = sigma;
}

/// The sigma-independent part of an event graph.
struct GraphInputs {
  Matrix features;   // n x 6, standardized
  Matrix positions;  // n x 3, meters
};

inline GraphInputs prepare_graph_inputs(const Event& event, const DetectorGeometry& geometry, const FeatureNormalizer& normalizer) {
  if (event.hits.empty()) throw ValidationError("cannot build a graph for an event without hits");
  const auto n = static_cast<Eigen::Index>(event.hits.size());
  GraphInputs in{Matrix(n, kFeatureDim), Matrix(n, 3)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& h = event.hits[static_cast<std::size_t>(i)];
    const Vec3& p = geometry.position(h.dom_id);
    in.positions.row(i) = p.transpose();
    const auto f = raw_features(h, p);
    for (int k = 0; k < kFeatureDim; ++k) in.features(i, k) = (f[k] - normalizer.mean[k]) / normalizer.scale[k];
  }
  return in;
}

inline EventGraph make_graph(const GraphInputs& in, double sigma) {
  require_positive_sigma(sigma);
  EventGraph g;
  g.features = in.features;
  g.positions = in.positions;
  g.sq_dist = squared_distances(g.positions);
  set_sigma(g, sigma);
  return g;
}

/// Graph over the event's hits, in hit order.
inline EventGraph build_event_graph(const Event& event, const DetectorGeometry& geometry, double sigma,
                                   const FeatureNormalizer& normalizer) {
  require_positive_sigma(sigma);
  return make_graph(prepare_graph_inputs(event, geometry, normalizer), sigma);
}

}  // namespace icegraph
