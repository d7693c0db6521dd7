#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "bridgedpi/ad/ops.hpp"
#include "bridgedpi/data/dataset.hpp"
#include "bridgedpi/data/feature_store.hpp"
#include "bridgedpi/metrics/metrics.hpp"
#include "bridgedpi/model/bridgedpi.hpp"

namespace bridgedpi::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 100;
  double l2_lambda = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Stop after this many epochs without a validation AUC improvement; 0 never stops early.
  std::size_t patience = 0;
  /// Penalise every parameter instead of the weight matrices only.
  bool l2_all_params = false;
  /// Train without dropout noise.
  bool deterministic = false;

  void validate() const {
    if (!(learning_rate > 0.0))
      throw ConfigError("learning_rate must be positive");
    if (batch_size == 0)
      throw ConfigError("batch_size must be >= 1");
    if (!(l2_lambda >= 0.0))
      throw ConfigError("l2_lambda must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0))
      throw ConfigError("adam epsilon must be positive");
  }
};

// ---------------------------------------------------------------------------
// Loss

template <typename T>
bool penalised(const model::Parameter<T> &p, bool all_params) noexcept {
  return all_params || p.decay;
}

/// Mean binary cross-entropy plus lambda times the squared norm of the
/// penalised parameters.
template <typename T>
ad::Tensor<T> compute_loss(const ad::Tensor<T> &probabilities, const std::vector<int> &labels,
                           const model::ParameterStore<T> &params, double l2_lambda,
                           bool all_params = false) {
  std::vector<T> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw DataError("label at index " + std::to_string(i) + " is not 0 or 1");
    y[i] = static_cast<T>(labels[i]);
  }
  auto loss = ad::ops::binary_cross_entropy(probabilities, y);
  if (l2_lambda == 0.0)
    return loss;
  for (const auto &p : params.params())
    if (penalised(p, all_params))
      loss = ad::ops::add(loss, ad::ops::scale(ad::ops::sum_squares(p.value), static_cast<T>(l2_lambda)));
  return loss;
}

/// The L2 term alone, accumulated in double.
template <typename T>
double l2_penalty(const model::ParameterStore<T> &params, double l2_lambda,
                  bool all_params = false) {
  double acc = 0.0;
  for (const auto &p : params.params())
    if (penalised(p, all_params))
      for (T v : p.value.values())
        acc += static_cast<double>(v) * static_cast<double>(v);
  return l2_lambda * acc;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update from the gradients currently held by the
/// parameters. A parameter without a gradient buffer counts as zero
/// gradient. Non-finite gradients abort before anything is modified.
template <typename T>
void adam_step(model::ParameterStore<T> &params, AdamState &state, const TrainConfig &config) {
  auto &ps = params.params();
  if (state.m.empty()) {
    for (const auto &p : ps) {
      state.m.emplace_back(p.value.size(), 0.0);
      state.v.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state.m.size() != ps.size())
    throw ShapeError("adam state does not match the parameter list");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    if (state.m[k].size() != ps[k].value.size())
      throw ShapeError("adam moments for '" + ps[k].name + "' have the wrong size");
    if (ps[k].value.has_grad() && ps[k].value.grad().size() != ps[k].value.size())
      throw ShapeError("gradient of '" + ps[k].name + "' has the wrong size");
    for (T g : ps[k].value.grad())
      if (!std::isfinite(static_cast<double>(g)))
        throw Error("non-finite gradient in parameter '" + ps[k].name + "'");
  }

  ++state.t;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto &value = ps[k].value.values();
    const auto grad = ps[k].value.grad();
    auto &m = state.m[k];
    auto &v = state.v[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double step = config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
      value[i] = static_cast<T>(static_cast<double>(value[i]) - step);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_val_auc = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_epoch = 0;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord &)> on_epoch;
  /// Called after a new best validation AUC, with the model holding it.
  std::function<void(const EpochRecord &)> on_improvement;
};

inline std::string history_csv(const std::vector<EpochRecord> &history) {
  std::string out = "epoch,train_loss,val_auc,val_acc\n";
  char line[128];
  for (const auto &e : history) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_auc,
                  e.val_acc);
    out += line;
  }
  return out;
}

namespace detail {

constexpr std::uint64_t splitmix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Batch index lists for one epoch: a permutation keyed by (seed, epoch),
/// cut into batch_size chunks. A trailing singleton joins the previous batch
/// so batch-norm never sees a batch of one.
inline std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<std::size_t> &idx,
                                                           std::size_t batch_size,
                                                           std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order = idx;
  std::mt19937_64 rng(splitmix(seed ^ splitmix(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

template <typename T> std::vector<std::vector<T>> snapshot(const model::BridgeDPI<T> &m) {
  std::vector<std::vector<T>> s;
  for (const auto &p : m.parameters().params())
    s.push_back(p.value.values());
  for (const auto &b : m.parameters().buffers())
    s.push_back(b.second->values());
  return s;
}

template <typename T>
void load_snapshot(model::BridgeDPI<T> &m, const std::vector<std::vector<T>> &s) {
  std::size_t k = 0;
  for (auto &p : m.parameters().params())
    p.value.values() = s[k++];
  for (auto &b : m.parameters().buffers())
    b.second->values() = s[k++];
}

} // namespace detail

/// Inference-mode probabilities for the records `idx`, in order.
template <typename T>
std::vector<double> predict(const model::BridgeDPI<T> &m, const data::FeatureStore &features,
                            const std::vector<std::size_t> &idx, std::size_t batch_size = 512) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::vector<std::size_t> chunk(
        idx.begin() + static_cast<long>(start),
        idx.begin() + static_cast<long>(std::min(idx.size(), start + batch_size)));
    const auto y = m.forward(features.proteins(chunk), features.drugs(chunk),
                             model::Mode::inference());
    for (T v : y.values())
      out.push_back(static_cast<double>(v));
  }
  return out;
}

inline std::vector<int> labels_of(const std::vector<data::PairRecord> &records,
                                  const std::vector<std::size_t> &idx) {
  std::vector<int> y;
  y.reserve(idx.size());
  for (auto i : idx)
    y.push_back(records.at(i).label);
  return y;
}

/// Mini-batch Adam on `train_idx` with validation-AUC model selection. On
/// return the model holds the parameters of the best epoch.
template <typename T>
TrainResult train(model::BridgeDPI<T> &m, const data::FeatureStore &features,
                  const std::vector<data::PairRecord> &records,
                  const std::vector<std::size_t> &train_idx,
                  const std::vector<std::size_t> &valid_idx, const TrainConfig &config,
                  const TrainCallbacks &callbacks = {}) {
  config.validate();
  if (train_idx.empty() || valid_idx.empty())
    throw DataError("training and validation partitions must be non-empty");
  const auto valid_labels = labels_of(records, valid_idx);
  const auto positives = std::accumulate(valid_labels.begin(), valid_labels.end(), std::size_t{0});
  if (positives == 0 || positives == valid_labels.size())
    throw DataError("validation set has a single class; AUC is undefined");

  TrainResult result;
  AdamState adam;
  auto best = detail::snapshot(m);
  m.seed_dropout(detail::splitmix(config.seed ^ 0x64726f706f7574ULL));
  const auto mode = model::Mode::train(!config.deterministic);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto &batch : detail::epoch_batches(train_idx, config.batch_size, config.seed, epoch)) {
      m.parameters().zero_grad();
      ad::Tape<T> tape;
      ad::Tensor<T> loss;
      {
        typename ad::Tape<T>::Recording rec(tape);
        const auto p = m.forward(features.proteins(batch), features.drugs(batch), mode);
        loss = compute_loss(p, labels_of(records, batch), m.parameters(), config.l2_lambda,
                            config.l2_all_params);
      }
      tape.backward(loss);
      adam_step(m.parameters(), adam, config);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
    }

    const auto scores = predict(m, features, valid_idx, config.batch_size);
    const auto report = metrics::evaluate(scores, valid_labels);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train_idx.size()), report.auc,
                    report.acc};
    result.history.push_back(rec);
    if (callbacks.on_epoch)
      callbacks.on_epoch(rec);
    if (std::isnan(result.best_val_auc) || rec.val_auc > result.best_val_auc) {
      result.best_val_auc = rec.val_auc;
      result.best_epoch = epoch;
      best = detail::snapshot(m);
      since_best = 0;
      if (callbacks.on_improvement)
        callbacks.on_improvement(rec);
    } else if (config.patience && ++since_best >= config.patience) {
      break;
    }
  }
  detail::load_snapshot(m, best);
  return result;
}

} // namespace bridgedpi::train
