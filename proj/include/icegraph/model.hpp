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
 * @file model.hpp
 * @brief Graph network: GConv layers, sum pooling and a logistic head.
 *
 * Layer t maps X (n x d) to Z = [A X, X] W + 1 b^T with W of shape (2d) x h,
 * and outputs [ReLU(Z), Z] (n x 2h). After the last layer the vertex rows are
 * summed and fed to sigmoid(p . a + b). Gradients are derived by hand,
 * including the one for the kernel width sigma, which reaches the loss
 * through every adjacency product.
 */

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "icegraph/error.hpp"
#include "icegraph/graph.hpp"
#include "icegraph/rng.hpp"
#include "icegraph/text.hpp"

namespace icegraph {

struct GConvLayer {
  Matrix weight;  // (2 * d_in) x h
  Vector bias;    // h

  Eigen::Index input_dim() const noexcept { return weight.rows() / 2; }
  Eigen::Index width() const noexcept { return weight.cols(); }
  Eigen::Index output_dim() const noexcept { return 2 * weight.cols(); }
  bool operator==(const GConvLayer& o) const { return weight == o.weight && bias == o.bias; }
};

struct PoolingHead {
  Vector weight;  // d_T
  double bias = 0;
  bool operator==(const PoolingHead& o) const { return weight == o.weight && bias == o.bias; }
};

/// Every learnable value. Also used as the gradient container.
struct Parameters {
  double sigma = kDefaultSigma;
  std::vector<GConvLayer> layers;
  PoolingHead head;

  bool operator==(const Parameters&) const = default;

  /// Same shapes, all zeros.
  Parameters zeros_like() const {
    Parameters z;
    z.sigma = 0;
    for (const auto& l : layers) z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    z.head = {Vector::Zero(head.weight.size()), 0.0};
    return z;
  }

  std::size_t size() const {
    std::size_t n = 2 + static_cast<std::size_t>(head.weight.size());
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Flat view: sigma, then each layer's W (row-major) and b, then head a and b.
  std::vector<double> flatten() const {
    std::vector<double> v;
    v.reserve(size());
    v.push_back(sigma);
    for (const auto& l : layers) {
      v.insert(v.end(), l.weight.data(), l.weight.data() + l.weight.size());
      v.insert(v.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    v.insert(v.end(), head.weight.data(), head.weight.data() + head.weight.size());
    v.push_back(head.bias);
    return v;
  }

  void unflatten(const std::vector<double>& v) {
    if (v.size() != size()) throw DimensionError("flat parameter vector has the wrong length");
    std::size_t k = 0;
    sigma = v[k++];
    for (auto& l : layers) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(k), l.weight.size(), l.weight.data());
      k += static_cast<std::size_t>(l.weight.size());
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(k), l.bias.size(), l.bias.data());
      k += static_cast<std::size_t>(l.bias.size());
    }
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(k), head.weight.size(), head.weight.data());
    k += static_cast<std::size_t>(head.weight.size());
    head.bias = v[k];
  }

  Parameters& operator+=(const Parameters& o) {
    sigma += o.sigma;
    for (std::size_t t = 0; t < layers.size(); ++t) {
      layers[t].weight += o.layers[t].weight;
      layers[t].bias += o.layers[t].bias;
    }
    head.weight += o.head.weight;
    head.bias += o.head.bias;
    return *this;
  }

  Parameters& operator*=(double s) {
    sigma *= s;
    for (auto& l : layers) {
      l.weight *= s;
      l.bias *= s;
    }
    head.weight *= s;
    head.bias *= s;
    return *this;
  }
};

using Gradients = Parameters;

struct GnnModel {
  Parameters params;
  FeatureNormalizer normalizer;
  int input_dim = kFeatureDim;

  bool operator==(const GnnModel&) const = default;

  double sigma() const noexcept { return params.sigma; }
  Eigen::Index output_dim() const { return params.layers.empty() ? input_dim : params.layers.back().output_dim(); }

  void validate() const {
    require_positive_sigma(params.sigma);
    Eigen::Index d = input_dim;
    for (std::size_t t = 0; t < params.layers.size(); ++t) {
      const auto& l = params.layers[t];
      if (l.weight.rows() != 2 * d || l.bias.size() != l.weight.cols() || l.weight.cols() < 1)
        throw DimensionError("layer " + std::to_string(t) + ": weight must be " + std::to_string(2 * d) + " x h with an h-vector bias");
      if (!l.weight.allFinite() || !l.bias.allFinite()) throw NumericalError("layer " + std::to_string(t) + " has non-finite values");
      d = l.output_dim();
    }
    if (params.head.weight.size() != d) throw DimensionError("pooling head weight must have length " + std::to_string(d));
    if (!params.head.weight.allFinite() || !std::isfinite(params.head.bias)) throw NumericalError("pooling head has non-finite values");
  }
};

inline const std::vector<int> kDefaultWidths = {32, 64, 64};

/// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases, sigma = 125 m.
inline GnnModel make_model(const std::vector<int>& widths, std::uint64_t seed, FeatureNormalizer normalizer = {},
                           double sigma = kDefaultSigma) {
  CounterRng rng(seed, 0x6d6f64656cULL);
  GnnModel m;
  m.normalizer = normalizer;
  m.params.sigma = sigma;
  Eigen::Index d = m.input_dim;
  auto fill = [&rng](Matrix& w, double limit) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
  };
  for (int h : widths) {
    if (h < 1) throw ConfigError("layer widths must be >= 1");
    GConvLayer l{Matrix(2 * d, h), Vector::Zero(h)};
    fill(l.weight, std::sqrt(6.0 / static_cast<double>(2 * d + h)));
    m.params.layers.push_back(std::move(l));
    d = 2 * h;
  }
  Matrix a(d, 1);
  fill(a, std::sqrt(6.0 / static_cast<double>(d + 1)));
  m.params.head = {Eigen::Map<Vector>(a.data(), d), 0.0};
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Forward

inline void check_layer_shapes(const Matrix& a, const Matrix& x, const GConvLayer& layer, std::size_t index) {
  if (a.rows() != a.cols() || a.rows() != x.rows())
    throw DimensionError("layer " + std::to_string(index) + ": adjacency is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " but features have " + std::to_string(x.rows()) + " rows");
  if (layer.weight.rows() != 2 * x.cols() || layer.bias.size() != layer.weight.cols())
    throw DimensionError("layer " + std::to_string(index) + ": expects " + std::to_string(layer.input_dim()) +
                         " input features, got " + std::to_string(x.cols()));
}

/// Z = [A X, X] W + 1 b^T.
inline Matrix gconv_forward(const Matrix& a, const Matrix& x, const GConvLayer& layer, std::size_t index = 0) {
  check_layer_shapes(a, x, layer, index);
  const auto d = x.cols();
  Matrix z = (a * x) * layer.weight.topRows(d);
  z.noalias() += x * layer.weight.bottomRows(d);
  z.rowwise() += layer.bias.transpose();
  return z;
}

/// [ReLU(Z), Z].
inline Matrix relu_concat(const Matrix& z) {
  Matrix out(z.rows(), 2 * z.cols());
  out.leftCols(z.cols()) = z.cwiseMax(0.0);
  out.rightCols(z.cols()) = z;
  return out;
}

inline Matrix layer_forward(const Matrix& a, const Matrix& x, const GConvLayer& layer, std::size_t index = 0) {
  return relu_concat(gconv_forward(a, x, layer, index));
}

inline double sigmoid(double s) {
  return s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
}

struct ForwardCache {
  std::vector<Matrix> inputs;  // X^(t), one per layer
  std::vector<Matrix> ax;      // A X^(t)
  std::vector<Matrix> z;       // pre-activation
  Matrix output;               // X^(T)
  RowVector pooled;
  double logit = 0;
  double score = 0.5;
};

/// Score in (0,1) and the activations needed by backward().
inline ForwardCache forward(const GnnModel& model, const EventGraph& graph) {
  const auto& p = model.params;
  if (graph.features.cols() != model.input_dim)
    throw DimensionError("graph has " + std::to_string(graph.features.cols()) + " features, model expects " +
                         std::to_string(model.input_dim));
  if (graph.sigma != p.sigma) throw DomainError("graph adjacency was built for a different sigma than the model's");
  if (p.head.weight.size() != model.output_dim()) throw DimensionError("pooling head does not match the last layer");
  ForwardCache c;
  const Matrix& a = graph.adjacency;
  Matrix x = graph.features;
  for (std::size_t t = 0; t < p.layers.size(); ++t) {
    const auto& layer = p.layers[t];
    check_layer_shapes(a, x, layer, t);
    const auto d = x.cols();
    Matrix ax = a * x;
    Matrix z = ax * layer.weight.topRows(d);
    z.noalias() += x * layer.weight.bottomRows(d);
    z.rowwise() += layer.bias.transpose();
    Matrix next = relu_concat(z);
    c.inputs.push_back(std::move(x));
    c.ax.push_back(std::move(ax));
    c.z.push_back(std::move(z));
    x = std::move(next);
  }
  c.pooled = x.colwise().sum();
  c.output = std::move(x);
  c.logit = c.pooled.dot(p.head.weight) + p.head.bias;
  c.score = sigmoid(c.logit);
  return c;
}

inline double score(const GnnModel& model, const EventGraph& graph) { return forward(model, graph).score; }

// ---------------------------------------------------------------------------
// Loss and backward

inline constexpr double kScoreClamp = 1e-12;

/// Weighted binary cross-entropy with the score clamped to [1e-12, 1 - 1e-12].
inline double loss(double score, Label label, double weight) {
  const double p = std::clamp(score, kScoreClamp, 1.0 - kScoreClamp);
  return label == Label::signal ? -weight * std::log(p) : -weight * std::log1p(-p);
}

/// Reverse-mode gradient of the event loss with respect to every parameter.
///
/// The logit gradient is weight * (score - y), the derivative of the
/// unclamped cross-entropy; the clamp only guards the reported loss value.
/// ReLU'(0) = 0.
inline Gradients backward(const GnnModel& model, const EventGraph& graph, const ForwardCache& cache, Label label, double weight) {
  const auto& p = model.params;
  const std::size_t T = p.layers.size();
  if (cache.z.size() != T || cache.output.rows() != graph.size() || cache.pooled.size() != p.head.weight.size())
    throw DimensionError("forward cache does not match this model and graph");

  Gradients g = p.zeros_like();
  if (weight == 0.0) return g;
  const double y = label == Label::signal ? 1.0 : 0.0;
  const double dlogit = weight * (cache.score - y);

  g.head.weight = dlogit * cache.pooled.transpose();
  g.head.bias = dlogit;

  const Matrix& a = graph.adjacency;
  const auto n = graph.size();
  // Pooling is a column sum, so every vertex row receives the same gradient.
  Matrix dx = Matrix::Ones(n, 1) * (dlogit * p.head.weight.transpose());
  Matrix da = Matrix::Zero(n, n);

  for (std::size_t t = T; t-- > 0;) {
    const auto& layer = p.layers[t];
    const Matrix& z = cache.z[t];
    const Matrix& x = cache.inputs[t];
    const auto h = z.cols();
    const auto d = x.cols();
    if (dx.cols() != 2 * h || z.rows() != n) throw DimensionError("stale forward cache at layer " + std::to_string(t));

    const Matrix dz = (dx.leftCols(h).array() * (z.array() > 0.0).cast<double>()).matrix() + dx.rightCols(h);
    auto& gl = g.layers[t];
    gl.weight.topRows(d).noalias() = cache.ax[t].transpose() * dz;
    gl.weight.bottomRows(d).noalias() = x.transpose() * dz;
    gl.bias = dz.colwise().sum().transpose();

    const Matrix dax = dz * layer.weight.topRows(d).transpose();
    da.noalias() += dax * x.transpose();
    if (t > 0) {
      Matrix dx_prev = dz * layer.weight.bottomRows(d).transpose();
      dx_prev.noalias() += a.transpose() * dax;
      dx = std::move(dx_prev);
    }
  }
  if (n > 1) {
    const Matrix da_ds = adjacency_grad_sigma(graph.sq_dist, graph.kernel, graph.adjacency, graph.sigma);
    g.sigma = (da.array() * da_ds.array()).sum();
  }
  return g;
}

struct EventResult {
  double score = 0.5;
  double loss = 0;
  Gradients grad;
};

inline EventResult event_gradients(const GnnModel& model, const EventGraph& graph, Label label, double weight) {
  const auto cache = forward(model, graph);
  return {cache.score, loss(cache.score, label, weight), backward(model, graph, cache, label, weight)};
}

// ---------------------------------------------------------------------------
// Model file
//
//   icegraph-model <version>
//   input_dim 6
//   sigma <value>
//   normalizer_mean <6 values>
//   normalizer_scale <6 values>
//   layers <T>
//   layer <t> <2*d_in> <h>
//   weight <row-major values>
//   bias <h values>
//   head <d_T>
//   weight <d_T values>
//   bias <value>
//   end
//
// Numbers use the shortest decimal form that round-trips to the same double.

inline constexpr int kModelFormatVersion = 1;

namespace detail {
template <class It>
void append_values(std::string& out, It begin, It end) {
  for (auto it = begin; it != end; ++it) {
    out += ' ';
    out += text::format_double(*it);
  }
}
}  // namespace detail

inline std::string serialize_model(const GnnModel& m) {
  m.validate();
  std::string out = "icegraph-model " + std::to_string(kModelFormatVersion) + "\n";
  out += "input_dim " + std::to_string(m.input_dim) + "\n";
  out += "sigma " + text::format_double(m.params.sigma) + "\n";
  out += "normalizer_mean";
  detail::append_values(out, m.normalizer.mean.begin(), m.normalizer.mean.end());
  out += "\nnormalizer_scale";
  detail::append_values(out, m.normalizer.scale.begin(), m.normalizer.scale.end());
  out += "\nlayers " + std::to_string(m.params.layers.size()) + "\n";
  for (std::size_t t = 0; t < m.params.layers.size(); ++t) {
    const auto& l = m.params.layers[t];
    out += "layer " + std::to_string(t) + " " + std::to_string(l.weight.rows()) + " " + std::to_string(l.weight.cols()) + "\n";
    out += "weight";
    detail::append_values(out, l.weight.data(), l.weight.data() + l.weight.size());
    out += "\nbias";
    detail::append_values(out, l.bias.data(), l.bias.data() + l.bias.size());
    out += "\n";
  }
  out += "head " + std::to_string(m.params.head.weight.size()) + "\n";
  out += "weight";
  detail::append_values(out, m.params.head.weight.data(), m.params.head.weight.data() + m.params.head.weight.size());
  out += "\nbias " + text::format_double(m.params.head.bias) + "\nend\n";
  return out;
}

inline GnnModel parse_model(std::string_view content) {
  const auto lines = text::split(content, '\n');
  std::size_t next = 0;
  // Returns the tokens of the next line, which must start with `key`.
  auto expect = [&](std::string_view key) {
    while (next < lines.size() && text::trim(lines[next]).empty()) ++next;
    if (next >= lines.size()) throw ParseError("truncated model file: missing '" + std::string(key) + "'", next + 1);
    auto tok = text::tokens(text::trim(lines[next]));
    ++next;
    if (tok.empty() || tok[0] != key) throw ParseError("expected '" + std::string(key) + "'", next);
    return tok;
  };
  auto numbers = [&](const std::vector<std::string_view>& tok, std::size_t count) {
    if (tok.size() != count + 1) throw ParseError("expected " + std::to_string(count) + " values", next);
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = text::parse_double(tok[i + 1], next);
    return v;
  };
  auto integer = [&](std::string_view key) {
    const auto tok = expect(key);
    if (tok.size() < 2) throw ParseError("expected a value after '" + std::string(key) + "'", next);
    return text::parse_int<long long>(tok[1], next);
  };

  const auto version = integer("icegraph-model");
  if (version != kModelFormatVersion)
    throw ParseError("unsupported model format version " + std::to_string(version) + " (expected " +
                     std::to_string(kModelFormatVersion) + ")", 1);
  GnnModel m;
  m.input_dim = static_cast<int>(integer("input_dim"));
  m.params.sigma = numbers(expect("sigma"), 1)[0];
  const auto mean = numbers(expect("normalizer_mean"), kFeatureDim);
  const auto scale = numbers(expect("normalizer_scale"), kFeatureDim);
  std::copy(mean.begin(), mean.end(), m.normalizer.mean.begin());
  std::copy(scale.begin(), scale.end(), m.normalizer.scale.begin());
  const auto layer_count = integer("layers");
  if (layer_count < 0 || layer_count > 1000) throw ParseError("bad layer count", next);
  for (long long t = 0; t < layer_count; ++t) {
    const auto tok = expect("layer");
    if (tok.size() != 4 || text::parse_int<long long>(tok[1], next) != t) throw ParseError("expected 'layer <t> <rows> <cols>'", next);
    const auto rows = text::parse_int<Eigen::Index>(tok[2], next);
    const auto cols = text::parse_int<Eigen::Index>(tok[3], next);
    if (rows < 1 || cols < 1) throw ParseError("bad layer shape", next);
    const auto w = numbers(expect("weight"), static_cast<std::size_t>(rows * cols));
    const auto b = numbers(expect("bias"), static_cast<std::size_t>(cols));
    GConvLayer l{Matrix(rows, cols), Vector(cols)};
    std::copy(w.begin(), w.end(), l.weight.data());
    std::copy(b.begin(), b.end(), l.bias.data());
    m.params.layers.push_back(std::move(l));
  }
  const auto head_dim = integer("head");
  if (head_dim < 1) throw ParseError("bad head size", next);
  const auto a = numbers(expect("weight"), static_cast<std::size_t>(head_dim));
  m.params.head.weight = Eigen::Map<const Vector>(a.data(), head_dim);
  m.params.head.bias = numbers(expect("bias"), 1)[0];
  expect("end");
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid model: ") + e.what());
  }
  return m;
}

inline void save_model(const GnnModel& m, const std::string& path) { text::write_file(path, serialize_model(m)); }

inline GnnModel load_model(const std::string& path) { return parse_model(text::read_file(path)); }

}  // namespace icegraph
