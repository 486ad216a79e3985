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
 * @file training.hpp
 * @brief Per-class dataset split, minibatch training with early stopping,
 *        final model selection and model evaluation.
 */

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "icegraph/error.hpp"
#include "icegraph/event.hpp"
#include "icegraph/geometry.hpp"
#include "icegraph/graph.hpp"
#include "icegraph/metrics.hpp"
#include "icegraph/model.hpp"
#include "icegraph/parallel.hpp"
#include "icegraph/rng.hpp"
#include "icegraph/text.hpp"

namespace icegraph {

// ---------------------------------------------------------------------------
// Split

struct SplitSpec {
  std::array<double, 3> fractions{0.5, 0.25, 0.25};  // train, validation, test
  std::uint64_t seed = 1;

  void validate() const {
    double sum = 0;
    for (double f : fractions) {
      if (!(f > 0 && f < 1)) throw ConfigError("each split fraction must lie in (0, 1)");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  }
};

/// Per-class counts (train, validation, test). Validation and test take
/// ceil(f * n); the remainder goes to train.
inline std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& fractions) {
  auto take = [](double f, std::size_t n) {
    return static_cast<std::size_t>(std::max(0.0, std::ceil(f * static_cast<double>(n) - 1e-9)));
  };
  const std::size_t val = std::min(n, take(fractions[1], n));
  const std::size_t test = std::min(n - val, take(fractions[2], n));
  return {n - val - test, val, test};
}

struct DatasetSplit {
  std::vector<Event> train;
  std::vector<Event> validation;
  std::vector<Event> test;
};

/// Shuffles each class independently and cuts it by split_counts. Each part
/// keeps the input order of its events.
inline DatasetSplit split_dataset(const std::vector<Event>& events, const SplitSpec& spec) {
  spec.validate();
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < events.size(); ++i) by_class[events[i].is_signal() ? 1 : 0].push_back(i);
  if (by_class[0].empty() || by_class[1].empty()) throw ValidationError("split needs at least one event of each class");

  std::array<std::vector<std::size_t>, 3> parts;
  for (int cls = 1; cls >= 0; --cls) {
    auto idx = by_class[static_cast<std::size_t>(cls)];
    CounterRng rng(spec.seed, 0x73706c6974ULL + static_cast<std::uint64_t>(cls));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto counts = split_counts(idx.size(), spec.fractions);
    std::size_t k = 0;
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t c = 0; c < counts[p]; ++c) parts[p].push_back(idx[k++]);
  }
  DatasetSplit out;
  std::array<std::vector<Event>*, 3> dst{&out.train, &out.validation, &out.test};
  for (std::size_t p = 0; p < 3; ++p) {
    std::sort(parts[p].begin(), parts[p].end());
    dst[p]->reserve(parts[p].size());
    for (auto i : parts[p]) dst[p]->push_back(events[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

enum class Optimizer { sgd, adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  int max_epochs = 100;
  int patience = 15;
  Optimizer optimizer = Optimizer::adam;
  bool weighted_loss = true;
  std::uint64_t seed = 1;
  std::vector<int> widths = kDefaultWidths;
  double sigma_init = kDefaultSigma;
  double target_snr = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.0;  // sgd only

  void validate() const {
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(sigma_init > 0)) throw ConfigError("sigma_init must be > 0");
    if (!(target_snr > 0)) throw ConfigError("target_snr must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0)) throw ConfigError("bad adam constants");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
    for (int w : widths)
      if (w < 1) throw ConfigError("layer widths must be >= 1");
  }
};

inline const char* to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

inline bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

/// Reads a flat key=value training config over the defaults. Unknown keys are rejected.
inline TrainConfig train_config_from(const text::KeyValues& kv, TrainConfig c = {}) {
  for (const auto& [key, value] : kv) {
    if (key == "learning_rate") c.learning_rate = text::parse_double(value);
    else if (key == "batch_size") c.batch_size = text::parse_int<std::size_t>(value);
    else if (key == "max_epochs") c.max_epochs = text::parse_int<int>(value);
    else if (key == "patience") c.patience = text::parse_int<int>(value);
    else if (key == "optimizer") {
      if (value == "adam") c.optimizer = Optimizer::adam;
      else if (value == "sgd") c.optimizer = Optimizer::sgd;
      else throw ConfigError("optimizer must be 'adam' or 'sgd'");
    } else if (key == "weighted_loss") c.weighted_loss = parse_bool(value);
    else if (key == "seed") c.seed = text::parse_int<std::uint64_t>(value);
    else if (key == "widths") {
      c.widths.clear();
      for (auto w : text::split(value, ',')) c.widths.push_back(text::parse_int<int>(text::trim(w)));
    } else if (key == "sigma_init") c.sigma_init = text::parse_double(value);
    else if (key == "target_snr") c.target_snr = text::parse_double(value);
    else if (key == "beta1") c.beta1 = text::parse_double(value);
    else if (key == "beta2") c.beta2 = text::parse_double(value);
    else if (key == "epsilon") c.epsilon = text::parse_double(value);
    else if (key == "momentum") c.momentum = text::parse_double(value);
    else throw ConfigError("unknown training config key '" + key + "'");
  }
  c.validate();
  return c;
}

inline text::KeyValues to_key_values(const TrainConfig& c) {
  using text::format_double;
  std::string widths;
  for (std::size_t t = 0; t < c.widths.size(); ++t) widths += (t ? "," : "") + std::to_string(c.widths[t]);
  return {
      {"learning_rate", format_double(c.learning_rate)},
      {"batch_size", std::to_string(c.batch_size)},
      {"max_epochs", std::to_string(c.max_epochs)},
      {"patience", std::to_string(c.patience)},
      {"optimizer", to_string(c.optimizer)},
      {"weighted_loss", c.weighted_loss ? "true" : "false"},
      {"seed", std::to_string(c.seed)},
      {"widths", widths},
      {"sigma_init", format_double(c.sigma_init)},
      {"target_snr", format_double(c.target_snr)},
      {"beta1", format_double(c.beta1)},
      {"beta2", format_double(c.beta2)},
      {"epsilon", format_double(c.epsilon)},
      {"momentum", format_double(c.momentum)},
  };
}

// ---------------------------------------------------------------------------
// Scoring

inline std::vector<GraphInputs> prepare_all(const std::vector<Event>& events, const DetectorGeometry& geometry,
                                            const FeatureNormalizer& normalizer, unsigned threads = 1) {
  std::vector<GraphInputs> out(events.size());
  parallel_for(events.size(), threads, [&](std::size_t i) { out[i] = prepare_graph_inputs(events[i], geometry, normalizer); });
  return out;
}

inline std::vector<ScoredEvent> score_inputs(const GnnModel& model, const std::vector<GraphInputs>& inputs,
                                             const std::vector<Event>& events, unsigned threads = 1) {
  if (inputs.size() != events.size()) throw DimensionError("one graph input per event required");
  std::vector<ScoredEvent> out(events.size());
  parallel_for(events.size(), threads, [&](std::size_t i) {
    out[i] = {score(model, make_graph(inputs[i], model.sigma())), events[i].label, events[i].weight};
  });
  return out;
}

/// Model scores of every event, in event order.
inline std::vector<ScoredEvent> score_events(const GnnModel& model, const std::vector<Event>& events,
                                             const DetectorGeometry& geometry, unsigned threads = 1) {
  model.validate();
  return score_inputs(model, prepare_all(events, geometry, model.normalizer, threads), events, threads);
}

inline EvalReport evaluate(const GnnModel& model, const std::vector<Event>& events, const DetectorGeometry& geometry,
                           double target_snr = 1.0, unsigned threads = 1) {
  return make_report(score_events(model, events, geometry, threads), target_snr);
}

/// Selection metric: weighted signal/year at the operating point, 0 when infeasible.
inline double selection_metric(const std::vector<ScoredEvent>& scored, double target_snr) {
  const auto op = operating_point(scored, target_snr);
  return op.feasible ? op.signal : 0.0;
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_metric = 0;
  double seconds = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_metric = 0;
  bool stopped_early = false;
  std::string model_path;
};

/// `epoch,train_loss,val_metric,seconds` CSV.
inline std::string report_csv(const TrainReport& r) {
  std::string out = "epoch,train_loss,val_metric,seconds\n";
  for (const auto& e : r.epochs)
    out += std::to_string(e.epoch) + "," + text::format_double(e.train_loss) + "," + text::format_double(e.val_metric) + "," +
           text::format_double(e.seconds) + "\n";
  return out;
}

struct TrainResult {
  GnnModel model;
  TrainReport report;
};

/// Optimizer state over the flat parameter vector. Element 0 (sigma) is
/// stepped in log space so it stays positive.
class ParameterOptimizer {
 public:
  ParameterOptimizer(const TrainConfig& c, std::size_t n) : c_(c), m_(n, 0.0), v_(n, 0.0) {}

  void step(Parameters& params, const Gradients& grad) {
    auto x = params.flatten();
    auto g = grad.flatten();
    g[0] *= x[0];
    x[0] = std::log(x[0]);
    ++t_;
    if (c_.optimizer == Optimizer::adam) {
      const double b1t = 1.0 - std::pow(c_.beta1, static_cast<double>(t_));
      const double b2t = 1.0 - std::pow(c_.beta2, static_cast<double>(t_));
      for (std::size_t k = 0; k < x.size(); ++k) {
        m_[k] = c_.beta1 * m_[k] + (1.0 - c_.beta1) * g[k];
        v_[k] = c_.beta2 * v_[k] + (1.0 - c_.beta2) * g[k] * g[k];
        x[k] -= c_.learning_rate * (m_[k] / b1t) / (std::sqrt(v_[k] / b2t) + c_.epsilon);
      }
    } else {
      for (std::size_t k = 0; k < x.size(); ++k) {
        m_[k] = c_.momentum * m_[k] + g[k];
        x[k] -= c_.learning_rate * m_[k];
      }
    }
    x[0] = std::exp(x[0]);
    params.unflatten(x);
  }

 private:
  TrainConfig c_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains `model` in place from its current parameters and returns the
/// parameters of the best validation epoch.
inline TrainResult train(GnnModel model, const std::vector<Event>& train_set, const std::vector<Event>& validation_set,
                         const DetectorGeometry& geometry, const TrainConfig& config, unsigned threads = 1,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  model.validate();
  auto has_both = [](const std::vector<Event>& v) {
    bool s = false, b = false;
    for (const auto& e : v) (e.is_signal() ? s : b) = true;
    return s && b;
  };
  if (train_set.empty() || validation_set.empty()) throw ValidationError("training and validation sets must be non-empty");
  if (!has_both(validation_set)) throw ValidationError("validation set needs events of both classes");

  const auto train_inputs = prepare_all(train_set, geometry, model.normalizer, threads);
  const auto val_inputs = prepare_all(validation_set, geometry, model.normalizer, threads);

  ParameterOptimizer opt(config, model.params.size());
  TrainResult result{model, {}};
  int stale = 0;

  std::vector<std::size_t> order(train_set.size());
  std::vector<EventResult> slots;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle_rng(config.seed, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0, weight_sum = 0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, order.size() - begin);
      slots.assign(count, {});
      parallel_for(count, threads, [&](std::size_t j) {
        const auto i = order[begin + j];
        const double w = config.weighted_loss ? train_set[i].weight : 1.0;
        slots[j] = event_gradients(model, make_graph(train_inputs[i], model.sigma()), train_set[i].label, w);
      });
      Gradients total = model.params.zeros_like();
      double batch_loss = 0, batch_weight = 0;
      for (std::size_t j = 0; j < count; ++j) {
        total += slots[j].grad;
        batch_loss += slots[j].loss;
        batch_weight += config.weighted_loss ? train_set[order[begin + j]].weight : 1.0;
      }
      if (!std::isfinite(batch_loss))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      loss_sum += batch_loss;
      weight_sum += batch_weight;
      if (!(batch_weight > 0)) continue;
      total *= 1.0 / batch_weight;
      opt.step(model.params, total);
      if (!std::isfinite(model.params.sigma) || !(model.params.sigma > 0))
        throw NumericalError("kernel width diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index));
    }

    const double metric = selection_metric(score_inputs(model, val_inputs, validation_set, threads), config.target_snr);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const EpochRecord rec{epoch, weight_sum > 0 ? loss_sum / weight_sum : 0.0, metric, seconds};
    result.report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (epoch == 1 || metric > result.report.best_metric) {
      result.report.best_metric = metric;
      result.report.best_epoch = epoch;
      result.model = model;
      stale = 0;
    } else if (++stale >= config.patience) {
      result.report.stopped_early = true;
      break;
    }
  }
  return result;
}

/// Fits the normalizer on the training set, initializes and trains a model.
inline TrainResult train_new(const std::vector<Event>& train_set, const std::vector<Event>& validation_set,
                             const DetectorGeometry& geometry, const TrainConfig& config, unsigned threads = 1,
                             const EpochCallback& on_epoch = {}) {
  config.validate();
  auto model = make_model(config.widths, config.seed, FeatureNormalizer::fit(train_set, geometry), config.sigma_init);
  return train(std::move(model), train_set, validation_set, geometry, config, threads, on_epoch);
}

/// Index of the candidate with the highest metric; ties go to the earliest.
inline std::size_t select_final_index(const std::vector<double>& metrics) {
  if (metrics.empty()) throw ValidationError("no candidate models to select from");
  std::size_t best = 0;
  for (std::size_t k = 1; k < metrics.size(); ++k)
    if (metrics[k] > metrics[best]) best = k;
  return best;
}

/// Candidate with the best selection metric on `test_set`.
inline GnnModel select_final(const std::vector<GnnModel>& models, const std::vector<Event>& test_set,
                             const DetectorGeometry& geometry, double target_snr = 1.0, unsigned threads = 1) {
  if (models.empty()) throw ValidationError("no candidate models to select from");
  std::vector<double> metrics;
  for (const auto& m : models) metrics.push_back(selection_metric(score_events(m, test_set, geometry, threads), target_snr));
  return models[select_final_index(metrics)];
}

}  // namespace icegraph
